//! Small dense LMI feasibility search.
//!
//! A problem is an affine map `θ ↦ L(θ)` from structured decision variables
//! (symmetric blocks `P ⪰ εI`, positive diagonals `Q ≥ ε`, free blocks `Y`)
//! to a symmetric matrix. The solver minimizes `s` subject to
//! `L(θ) ⪯ sI` with a log-det barrier and damped Newton steps, raising the
//! barrier weight geometrically, and keeps the iterate with the smallest
//! true `λmax`. A chosen set of constrained blocks shares a trace
//! normalization, since the condition and gain LMIs are homogeneous.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conditions::{assemble_via_lure, Certificate, ConditionId, Rate};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, DiagPosMatrix, GeneralMatrix, SymMatrix};

/// Shape of one decision block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBlock {
    /// Symmetric `n × n`, constrained `⪰ εI`.
    Sym(usize),
    /// Diagonal `n × n`, constrained `≥ ε` entrywise.
    Diag(usize),
    /// Unconstrained `rows × cols`.
    Free(usize, usize),
}

impl VarBlock {
    fn len(&self) -> usize {
        match *self {
            VarBlock::Sym(n) => n * (n + 1) / 2,
            VarBlock::Diag(n) => n,
            VarBlock::Free(r, c) => r * c,
        }
    }
}

/// Structured view of a decision vector.
#[derive(Debug, Clone)]
pub struct Decision<'a> {
    blocks: &'a [VarBlock],
    offsets: &'a [usize],
    theta: &'a [f64],
}

impl Decision<'_> {
    pub fn sym(&self, k: usize) -> DMatrix<f64> {
        let VarBlock::Sym(n) = self.blocks[k] else {
            panic!("block {k} is not symmetric");
        };
        let mut m = DMatrix::zeros(n, n);
        let mut idx = self.offsets[k];
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = self.theta[idx];
                m[(j, i)] = self.theta[idx];
                idx += 1;
            }
        }
        m
    }

    pub fn diag(&self, k: usize) -> Vec<f64> {
        let VarBlock::Diag(n) = self.blocks[k] else {
            panic!("block {k} is not diagonal");
        };
        self.theta[self.offsets[k]..self.offsets[k] + n].to_vec()
    }

    pub fn free(&self, k: usize) -> DMatrix<f64> {
        let VarBlock::Free(r, c) = self.blocks[k] else {
            panic!("block {k} is not free");
        };
        DMatrix::from_row_slice(r, c, &self.theta[self.offsets[k]..self.offsets[k] + r * c])
    }
}

/// `Σ trace(block) = total` over the listed symmetric or diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub blocks: Vec<usize>,
    pub total: f64,
}

impl Normalization {
    pub fn new(blocks: Vec<usize>, total: f64) -> Self {
        Self { blocks, total }
    }
}

/// `L(θ) = L₀ + Σ θᵢ Lᵢ` together with its constraint set.
#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    blocks: Vec<VarBlock>,
    offsets: Vec<usize>,
    nvars: usize,
    offset: DMatrix<f64>,
    basis: Vec<DMatrix<f64>>,
    normalization: Option<Normalization>,
    eps: f64,
    init: Vec<f64>,
}

impl FeasibilityProblem {
    /// Samples the affine `map` around `base` to recover `L₀` and the basis.
    /// `base` is also the solver's starting point and must lie in the
    /// constraint set.
    pub fn from_affine_map(
        blocks: Vec<VarBlock>,
        normalization: Option<Normalization>,
        eps: f64,
        base: Vec<f64>,
        map: impl Fn(&Decision<'_>) -> Result<DMatrix<f64>>,
    ) -> Result<Self> {
        if let Some(norm) = &normalization {
            if norm
                .blocks
                .iter()
                .any(|&k| k >= blocks.len() || matches!(blocks[k], VarBlock::Free(..)))
            {
                return Err(Error::InvalidArgument(
                    "normalization must list symmetric or diagonal blocks".into(),
                ));
            }
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut nvars = 0;
        for b in &blocks {
            offsets.push(nvars);
            nvars += b.len();
        }
        if base.len() != nvars {
            return Err(Error::DimensionMismatch(format!(
                "base point has {} entries, blocks need {nvars}",
                base.len()
            )));
        }
        let eval = |theta: &[f64]| {
            map(&Decision {
                blocks: &blocks,
                offsets: &offsets,
                theta,
            })
        };
        let at_base = eval(&base)?;
        if at_base.nrows() != at_base.ncols() {
            return Err(Error::DimensionMismatch(
                "affine map must produce a square matrix".into(),
            ));
        }
        let mut basis = Vec::with_capacity(nvars);
        let mut probe = base.clone();
        for i in 0..nvars {
            probe[i] += 1.0;
            let bi = eval(&probe)? - &at_base;
            probe[i] = base[i];
            basis.push(symmetrize(bi));
        }
        let mut offset = at_base;
        for (bi, &t) in basis.iter().zip(&base) {
            offset -= bi * t;
        }
        let offset = symmetrize(offset);

        Ok(Self {
            blocks,
            offsets,
            nvars,
            offset,
            basis,
            normalization,
            eps,
            init: base,
        })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn lmi_dim(&self) -> usize {
        self.offset.nrows()
    }

    pub fn decision<'a>(&'a self, theta: &'a [f64]) -> Decision<'a> {
        Decision {
            blocks: &self.blocks,
            offsets: &self.offsets,
            theta,
        }
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<SymMatrix> {
        let mut l = self.offset.clone();
        for (bi, &t) in self.basis.iter().zip(theta) {
            if t != 0.0 {
                l.zip_apply(bi, |a, b| *a += t * b);
            }
        }
        SymMatrix::new(symmetrize(l))
    }

    /// Euclidean (Frobenius) projection onto the constraint set.
    pub fn project(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut out = theta.to_vec();
        let view = self.decision(theta);
        // (block, eigen-decomposition) for symmetric blocks
        let mut eigs = Vec::new();
        let mut spectrum = Vec::new();
        let mut grouped = Vec::new();
        for (k, b) in self.blocks.iter().enumerate() {
            let in_group = self
                .normalization
                .as_ref()
                .is_some_and(|g| g.blocks.contains(&k));
            let before = spectrum.len();
            match *b {
                VarBlock::Sym(_) => {
                    let e = sym_eig(&SymMatrix::new(view.sym(k))?)?;
                    spectrum.extend_from_slice(&e.values);
                    eigs.push((k, e));
                }
                VarBlock::Diag(_) => spectrum.extend(view.diag(k)),
                VarBlock::Free(..) => {}
            }
            grouped.extend(std::iter::repeat_n(in_group, spectrum.len() - before));
        }
        let mut projected: Vec<f64> = spectrum.iter().map(|&v| v.max(self.eps)).collect();
        if let Some(norm) = &self.normalization {
            let idx: Vec<usize> = (0..spectrum.len()).filter(|&i| grouped[i]).collect();
            let sub: Vec<f64> = idx.iter().map(|&i| spectrum[i]).collect();
            for (&i, v) in idx
                .iter()
                .zip(project_capped_simplex(&sub, self.eps, norm.total)?)
            {
                projected[i] = v;
            }
        }
        let mut cursor = 0;
        let mut eig_iter = eigs.into_iter();
        for (k, b) in self.blocks.iter().enumerate() {
            match *b {
                VarBlock::Sym(n) => {
                    let (_, mut e) = eig_iter
                        .next()
                        .expect("one decomposition per symmetric block");
                    e.values.copy_from_slice(&projected[cursor..cursor + n]);
                    cursor += n;
                    let p = e.map_spectrum(|v| v);
                    let mut idx = self.offsets[k];
                    for i in 0..n {
                        for j in i..n {
                            out[idx] = p[(i, j)];
                            idx += 1;
                        }
                    }
                }
                VarBlock::Diag(n) => {
                    out[self.offsets[k]..self.offsets[k] + n]
                        .copy_from_slice(&projected[cursor..cursor + n]);
                    cursor += n;
                }
                VarBlock::Free(..) => {}
            }
        }
        Ok(out)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Projection of `v` onto `{x ≥ eps, Σx = total}`.
fn project_capped_simplex(v: &[f64], eps: f64, total: f64) -> Result<Vec<f64>> {
    let k = v.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let budget = total - eps * k as f64;
    if budget < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "normalization {total} is below {k} * eps"
        )));
    }
    let u: Vec<f64> = v.iter().map(|x| x - eps).collect();
    let mut sorted = u.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - budget) / (j + 1) as f64;
        if s - t > 0.0 {
            shift = t;
        }
    }
    Ok(u.iter().map(|x| (x - shift).max(0.0) + eps).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    Feasible,
    Marginal,
    NotFound,
}

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    pub theta: Vec<f64>,
    /// Final `λmax` of `L(θ)`.
    pub margin: f64,
    pub restarts_used: usize,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Extra attempts from perturbed starts after a numerical breakdown.
    pub max_restarts: usize,
    pub seed: u64,
    /// Factor by which the barrier weight grows between centerings.
    pub barrier_growth: f64,
    pub newton_iters: usize,
    /// Stop once the duality-gap bound falls below this, relative to the
    /// spectral scale of the starting point.
    pub gap_tol: f64,
    pub eps: f64,
    pub strict_tol: f64,
    /// Stop as soon as the true `λmax` drops to this value.
    pub stop_at: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_restarts: 8,
            seed: 0,
            barrier_growth: 10.0,
            newton_iters: 60,
            gap_tol: 1e-10,
            eps: 1e-6,
            strict_tol: 1e-7,
            stop_at: None,
        }
    }
}

impl SolverOptions {
    fn classify(&self, margin: f64) -> FeasibilityStatus {
        if margin <= -self.strict_tol {
            FeasibilityStatus::Feasible
        } else if margin <= self.strict_tol {
            FeasibilityStatus::Marginal
        } else {
            FeasibilityStatus::NotFound
        }
    }
}

/// Minimizes `λmax(L(θ))` over the constraint set. A numerical breakdown
/// triggers a retry from a perturbed start, up to `max_restarts` times.
pub fn min_lambda_max(
    problem: &FeasibilityProblem,
    opts: &SolverOptions,
) -> Result<FeasibilityResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut last = None;
    for attempt in 0..=opts.max_restarts {
        let start: Vec<f64> = if attempt == 0 {
            problem.init.clone()
        } else {
            problem
                .init
                .iter()
                .map(|&t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    t + 0.5 * z * t.abs().max(0.5)
                })
                .collect()
        };
        match barrier_solve(problem, &start, opts) {
            Ok((theta, margin)) => {
                return Ok(FeasibilityResult {
                    status: opts.classify(margin),
                    theta,
                    margin,
                    restarts_used: attempt + 1,
                })
            }
            Err(e @ Error::NumericalFailure(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt ran"))
}

/// Index of the upper-triangle entry `(i, j)`, `i ≤ j`, of an `n × n` block.
fn upper_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + j
}

impl FeasibilityProblem {
    /// `κI` per symmetric block and `κ` per diagonal entry, with `κ` chosen
    /// to meet the normalization; free blocks are zero.
    fn center(&self) -> Vec<f64> {
        let mut theta = vec![0.0; self.nvars];
        let grouped = |k: usize| {
            self.normalization
                .as_ref()
                .is_some_and(|g| g.blocks.contains(&k))
        };
        let count: usize = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(k, _)| grouped(*k))
            .map(|(_, b)| match *b {
                VarBlock::Sym(n) | VarBlock::Diag(n) => n,
                VarBlock::Free(..) => 0,
            })
            .sum();
        let kappa = match &self.normalization {
            Some(g) if count > 0 => g.total / count as f64,
            _ => 1.0,
        };
        for (k, b) in self.blocks.iter().enumerate() {
            let v = if grouped(k) { kappa } else { 1.0 };
            match *b {
                VarBlock::Sym(n) => {
                    for i in 0..n {
                        theta[self.offsets[k] + upper_index(n, i, i)] = v;
                    }
                }
                VarBlock::Diag(n) => theta[self.offsets[k]..self.offsets[k] + n].fill(v),
                VarBlock::Free(..) => {}
            }
        }
        theta
    }

    /// Coefficients of the normalization as a linear form in `θ`.
    fn normalization_row(&self) -> Option<Vec<f64>> {
        let g = self.normalization.as_ref()?;
        let mut row = vec![0.0; self.nvars];
        for &k in &g.blocks {
            match self.blocks[k] {
                VarBlock::Sym(n) => {
                    for i in 0..n {
                        row[self.offsets[k] + upper_index(n, i, i)] = 1.0;
                    }
                }
                VarBlock::Diag(n) => row[self.offsets[k]..self.offsets[k] + n].fill(1.0),
                VarBlock::Free(..) => {}
            }
        }
        Some(row)
    }

    /// Barrier terms of the block constraints `P ⪰ εI`, `q ≥ ε`: value,
    /// gradient and Hessian added in place. `None` outside the interior.
    fn block_barrier(
        &self,
        theta: &[f64],
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    ) -> Result<Option<f64>> {
        let mut value = 0.0;
        let view = self.decision(theta);
        for (k, b) in self.blocks.iter().enumerate() {
            let off = self.offsets[k];
            match *b {
                VarBlock::Sym(n) => {
                    let shifted = view.sym(k) - DMatrix::identity(n, n) * self.eps;
                    let Some(chol) = shifted.cholesky() else {
                        return Ok(None);
                    };
                    value -= 2.0
                        * chol
                            .l_dirty()
                            .diagonal()
                            .iter()
                            .map(|v| v.ln())
                            .sum::<f64>();
                    let x = chol.inverse();
                    let pairs: Vec<(usize, usize)> =
                        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
                    let weight = |i: usize, j: usize| if i == j { 0.5 } else { 1.0 };
                    for (a, &(i, j)) in pairs.iter().enumerate() {
                        grad[off + a] -= 2.0 * weight(i, j) * x[(i, j)];
                        for (bidx, &(k2, l)) in pairs.iter().enumerate().skip(a) {
                            let h = 2.0
                                * weight(i, j)
                                * weight(k2, l)
                                * (x[(i, k2)] * x[(j, l)] + x[(i, l)] * x[(j, k2)]);
                            hess[(off + a, off + bidx)] += h;
                            if bidx != a {
                                hess[(off + bidx, off + a)] += h;
                            }
                        }
                    }
                }
                VarBlock::Diag(n) => {
                    for i in 0..n {
                        let gap = theta[off + i] - self.eps;
                        if gap <= 0.0 {
                            return Ok(None);
                        }
                        value -= gap.ln();
                        grad[off + i] -= 1.0 / gap;
                        hess[(off + i, off + i)] += 1.0 / (gap * gap);
                    }
                }
                VarBlock::Free(..) => {}
            }
        }
        Ok(Some(value))
    }

    /// `−log det(sI − L(θ))` plus the block barriers, or `None` outside the
    /// interior.
    fn barrier_value(&self, theta: &[f64], s: f64) -> Result<Option<f64>> {
        let d = self.lmi_dim();
        let slack = DMatrix::identity(d, d) * s - self.evaluate(theta)?.into_matrix();
        let Some(chol) = slack.cholesky() else {
            return Ok(None);
        };
        let lmi = -2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        Ok(self.block_value(theta)?.map(|b| lmi + b))
    }

    fn block_value(&self, theta: &[f64]) -> Result<Option<f64>> {
        let mut value = 0.0;
        let view = self.decision(theta);
        for (k, b) in self.blocks.iter().enumerate() {
            match *b {
                VarBlock::Sym(n) => {
                    let shifted = view.sym(k) - DMatrix::identity(n, n) * self.eps;
                    let Some(chol) = shifted.cholesky() else {
                        return Ok(None);
                    };
                    value -= 2.0
                        * chol
                            .l_dirty()
                            .diagonal()
                            .iter()
                            .map(|v| v.ln())
                            .sum::<f64>();
                }
                VarBlock::Diag(_) => {
                    for q in view.diag(k) {
                        if q <= self.eps {
                            return Ok(None);
                        }
                        value -= (q - self.eps).ln();
                    }
                }
                VarBlock::Free(..) => {}
            }
        }
        Ok(Some(value))
    }

    /// Gradient and Hessian of the full barrier in `z = (θ, s)`.
    fn barrier_derivatives(
        &self,
        theta: &[f64],
        s: f64,
    ) -> Result<Option<(Vec<f64>, DMatrix<f64>)>> {
        let d = self.lmi_dim();
        let nz = self.nvars + 1;
        let slack = DMatrix::identity(d, d) * s - self.evaluate(theta)?.into_matrix();
        let Some(chol) = slack.cholesky() else {
            return Ok(None);
        };
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
        // Row j holds vec(L⁻¹ Gⱼ L⁻ᵀ), where Gⱼ = −Aⱼ for θⱼ and I for s.
        let mut rows = DMatrix::zeros(nz, d * d);
        let mut grad = vec![0.0; nz];
        for (j, g) in grad.iter_mut().enumerate() {
            let c = if j < self.nvars {
                -(&l_inv * &self.basis[j] * l_inv.transpose())
            } else {
                &l_inv * l_inv.transpose()
            };
            *g = -c.trace();
            rows.row_mut(j)
                .copy_from(&DMatrix::from_row_slice(1, d * d, c.as_slice()));
        }
        let mut hess = &rows * rows.transpose();
        if self.block_barrier(theta, &mut grad, &mut hess)?.is_none() {
            return Ok(None);
        }
        Ok(Some((grad, hess)))
    }
}

/// Path-following barrier method for `min s` subject to `L(θ) ⪯ sI` and the
/// block constraints. Returns the iterate with the smallest true `λmax`.
fn barrier_solve(
    problem: &FeasibilityProblem,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64)> {
    let projected = problem.project(start)?;
    let center = problem.center();
    let mut theta: Vec<f64> = projected
        .iter()
        .zip(&center)
        .map(|(p, c)| 0.9 * p + 0.1 * c)
        .collect();
    let lmax_of =
        |theta: &[f64]| -> Result<f64> { Ok(sym_eig(&problem.evaluate(theta)?)?.lambda_max()) };
    let e0 = sym_eig(&problem.evaluate(&theta)?)?;
    let scale = e0
        .values
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(1e-12);
    let mut s = e0.lambda_max() + (0.1 * scale).max(1e-9);
    let mut best = (e0.lambda_max(), theta.clone());
    let done = |v: f64| opts.stop_at.is_some_and(|stop| v <= stop);

    let row = problem.normalization_row();
    let degree = problem.lmi_dim()
        + problem
            .blocks
            .iter()
            .map(|b| match *b {
                VarBlock::Sym(n) | VarBlock::Diag(n) => n,
                VarBlock::Free(..) => 0,
            })
            .sum::<usize>();
    let nz = problem.nvars + 1;
    let mut t = degree as f64 / scale;

    let objective = |theta: &[f64], s: f64, t: f64| -> Result<Option<f64>> {
        Ok(problem.barrier_value(theta, s)?.map(|b| t * s + b))
    };

    for _ in 0..60 {
        let mut phi = objective(&theta, s, t)?
            .ok_or_else(|| Error::NumericalFailure("iterate left the interior".into()))?;
        for _ in 0..opts.newton_iters {
            if done(s) {
                break;
            }
            let Some((mut grad, mut hess)) = problem.barrier_derivatives(&theta, s)? else {
                return Err(Error::NumericalFailure("iterate left the interior".into()));
            };
            grad[nz - 1] += t;
            let reg = 1e-13 * hess.diagonal().amax().max(1e-300);
            for j in 0..nz {
                hess[(j, j)] += reg;
            }
            let step = match &row {
                Some(a) => {
                    let mut kkt = DMatrix::zeros(nz + 1, nz + 1);
                    kkt.view_mut((0, 0), (nz, nz)).copy_from(&hess);
                    for (j, &aj) in a.iter().enumerate() {
                        kkt[(j, nz)] = aj;
                        kkt[(nz, j)] = aj;
                    }
                    let mut rhs = nalgebra::DVector::zeros(nz + 1);
                    for j in 0..nz {
                        rhs[j] = -grad[j];
                    }
                    kkt.lu().solve(&rhs).map(|v| v.rows(0, nz).into_owned())
                }
                None => hess.lu().solve(&-nalgebra::DVector::from_vec(grad.clone())),
            };
            let step =
                step.ok_or_else(|| Error::NumericalFailure("singular Newton system".into()))?;
            let slope: f64 = step.iter().zip(&grad).map(|(a, b)| a * b).sum();
            if !slope.is_finite() {
                return Err(Error::NumericalFailure("non-finite Newton step".into()));
            }
            if -slope / 2.0 <= 1e-10 {
                break;
            }
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = theta
                    .iter()
                    .zip(step.iter())
                    .map(|(t, d)| t + alpha * d)
                    .collect();
                let s_trial = s + alpha * step[nz - 1];
                if let Some(v) = objective(&trial, s_trial, t)? {
                    if v <= phi + 0.25 * alpha * slope {
                        theta = trial;
                        s = s_trial;
                        phi = v;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let lmax = lmax_of(&theta)?;
        if !lmax.is_finite() {
            return Err(Error::NumericalFailure(
                "solver produced a non-finite margin".into(),
            ));
        }
        if lmax < best.0 {
            best = (lmax, theta.clone());
        }
        if done(best.0) || (degree as f64) / t < opts.gap_tol * scale {
            break;
        }
        t *= opts.barrier_growth;
    }
    // exact re-verification of the returned point
    let margin = lmax_of(&best.1)?;
    Ok((best.1, margin))
}

/// Result of [`find_certificate`]: the solver outcome plus, when found, a
/// certificate re-checked through the direct assembly.
#[derive(Debug, Clone)]
pub struct CertificateSearch {
    pub status: FeasibilityStatus,
    /// `λmax` of the directly assembled LMI at the returned `(P, Q)`.
    pub margin: f64,
    pub certificate: Option<Certificate>,
    pub restarts_used: usize,
}

/// Searches `(P, Q)` with `trace(P) + trace(Q) = 2n` for one condition cell.
/// `NotFound` never asserts infeasibility.
pub fn find_certificate(
    cond: ConditionId,
    w: &GeneralMatrix,
    rate: Rate,
    opts: &SolverOptions,
) -> Result<CertificateSearch> {
    let n = w.nrows();
    if w.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "W must be square, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if rate.time() != cond.time {
        return Err(Error::InvalidRate(format!(
            "{cond} needs a {:?} rate",
            cond.time
        )));
    }
    rate.validate()?;
    let blocks = vec![VarBlock::Sym(n), VarBlock::Diag(n)];
    let mut base = Vec::with_capacity(n * (n + 1) / 2 + n);
    for i in 0..n {
        for j in i..n {
            base.push(if i == j { 1.0 } else { 0.0 });
        }
    }
    base.extend(std::iter::repeat_n(1.0, n));
    let norm = Normalization::new(vec![0, 1], 2.0 * n as f64);
    let problem = FeasibilityProblem::from_affine_map(blocks, Some(norm), opts.eps, base, |d| {
        let p = SymMatrix::new(d.sym(0))?;
        let q = DiagPosMatrix::new(d.diag(1))?;
        Ok(assemble_via_lure(cond, w, &p, &q, rate)?.into_matrix())
    })?;
    let mut opts = opts.clone();
    if opts.stop_at.is_none() {
        opts.stop_at = Some(-10.0 * opts.strict_tol);
    }
    let res = min_lambda_max(&problem, &opts)?;
    let d = problem.decision(&res.theta);
    let p = SymMatrix::new(d.sym(0))?;
    let q = DiagPosMatrix::new(d.diag(1))?;
    let (holds, margin) = crate::conditions::check(cond, w, &p, &q, rate, opts.strict_tol)?;
    let status = if holds {
        opts.classify(margin)
    } else {
        FeasibilityStatus::NotFound
    };
    let certificate = if holds {
        Some(Certificate::checked(
            cond,
            w.clone(),
            p,
            q,
            rate,
            opts.strict_tol,
        )?)
    } else {
        None
    };
    Ok(CertificateSearch {
        status,
        margin,
        certificate,
        restarts_used: res.restarts_used,
    })
}
