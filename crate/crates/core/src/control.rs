//! Low-gain integral control of a contracting firing-rate plant
//! `ẋ = −x + Ψ(Wx + Bu)`, `y = Cx`, with `Ψ` slope-restricted to `[δ, 1]`
//! and the slow integrator `u̇ = εK(r − y)`.
//!
//! The gain comes from the LMI in `(P, Q, Y)`
//!
//! ```text
//! [[2c_r·P − 2δ·BᵀQB, Z − YC], [(Z − YC)ᵀ, −R]] ⪯ 0
//! Z = BᵀQ((1 − δ)I + 2δA),  R = 2δAᵀQA + (1 − δ)(QA + AᵀQ),  A = I − W
//! ```
//!
//! with `K = P⁻¹Y`.

use nalgebra::DMatrix;

use crate::conditions::Certificate;
use crate::error::{Error, Result};
use crate::feasibility::{
    min_lambda_max, FeasibilityProblem, FeasibilityStatus, Normalization, SolverOptions, VarBlock,
};
use crate::linalg::{
    block_sym, check_finite, lambda_max, lambda_min, matmul, spd_inverse, DiagPosMatrix,
    GeneralMatrix, SymMatrix,
};
use crate::lure::SlopeInterval;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    w: GeneralMatrix,
    b: GeneralMatrix,
    c: GeneralMatrix,
    delta: f64,
    certificate: Option<Certificate>,
}

impl PlantModel {
    pub fn new(w: GeneralMatrix, b: GeneralMatrix, c: GeneralMatrix, delta: f64) -> Result<Self> {
        let n = w.nrows();
        if n == 0
            || w.ncols() != n
            || b.nrows() != n
            || c.ncols() != n
            || b.ncols() == 0
            || c.nrows() == 0
        {
            return Err(Error::DimensionMismatch(format!(
                "W {}x{}, B {}x{}, C {}x{}",
                w.nrows(),
                w.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        check_finite(&w, "W")?;
        check_finite(&b, "B")?;
        check_finite(&c, "C")?;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta = {delta} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            w,
            b,
            c,
            delta,
            certificate: None,
        })
    }

    /// Attaches a contraction certificate for `W`.
    pub fn with_certificate(mut self, cert: Certificate) -> Result<Self> {
        if cert.w() != &self.w {
            return Err(Error::InvalidArgument(
                "certificate is for a different W".into(),
            ));
        }
        self.certificate = Some(cert);
        Ok(self)
    }

    pub fn w(&self) -> &GeneralMatrix {
        &self.w
    }

    pub fn b(&self) -> &GeneralMatrix {
        &self.b
    }

    pub fn c(&self) -> &GeneralMatrix {
        &self.c
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn slope(&self) -> SlopeInterval {
        SlopeInterval::new(self.delta, 1.0).expect("delta lies in (0, 1]")
    }

    pub fn state_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// `A = I − W`.
    pub fn a(&self) -> GeneralMatrix {
        let n = self.state_dim();
        DMatrix::identity(n, n) - &self.w
    }

    /// `A⁻¹B`.
    pub fn a_inv_b(&self) -> Result<GeneralMatrix> {
        let lu = self.a().lu();
        if lu.determinant().abs() < 1e-12 {
            return Err(Error::SingularA);
        }
        lu.solve(&self.b).ok_or(Error::SingularA)
    }
}

/// Gain `K = P⁻¹Y` with its certificate `(P, Q, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainResult {
    pub k: GeneralMatrix,
    pub p: SymMatrix,
    pub q: DiagPosMatrix,
    pub y: GeneralMatrix,
    pub c_r: f64,
    /// `λmax` of the gain LMI at `(P, Q, Y)`.
    pub margin: f64,
}

/// `Z = BᵀQ((1 − δ)I + 2δA)`.
fn z_block(plant: &PlantModel, q: &DiagPosMatrix) -> GeneralMatrix {
    let n = plant.state_dim();
    let d = plant.delta;
    let inner = DMatrix::identity(n, n) * (1.0 - d) + plant.a() * (2.0 * d);
    matmul(&matmul(&plant.b.transpose(), &q.to_matrix()), &inner)
}

/// The gain LMI of size `m + n`.
pub fn assemble_gain_lmi(
    plant: &PlantModel,
    p: &SymMatrix,
    q: &DiagPosMatrix,
    y: &GeneralMatrix,
    c_r: f64,
) -> Result<SymMatrix> {
    let (n, m, pp) = (plant.state_dim(), plant.input_dim(), plant.output_dim());
    if p.dim() != m || q.dim() != n || y.shape() != (m, pp) {
        return Err(Error::DimensionMismatch(format!(
            "P {0}x{0}, Q {1}x{1}, Y {2}x{3} for plant with n={n}, m={m}, p={pp}",
            p.dim(),
            q.dim(),
            y.nrows(),
            y.ncols()
        )));
    }
    let d = plant.delta;
    let a = plant.a();
    let qm = q.to_matrix();
    let qa = matmul(&qm, &a);
    let bqb = matmul(&plant.b.transpose(), &matmul(&qm, &plant.b));
    let r = matmul(&a.transpose(), &qa) * (2.0 * d) + (&qa + qa.transpose()) * (1.0 - d);
    let top = p.as_matrix() * (2.0 * c_r) - bqb * (2.0 * d);
    let off = z_block(plant, q) - matmul(y, &plant.c);
    block_sym(
        &((&top + top.transpose()) * 0.5),
        &off,
        &(-(&r + r.transpose()) * 0.5),
    )
}

/// Ratio between the returned gain and the smallest gain along the same
/// direction that still certifies `c_r`.
pub const GAIN_HEADROOM: f64 = 2.0;

/// Lower bound on `λmin(P)` during synthesis, relative to `trace(P)/m = 1`.
/// Keeps `K = P⁻¹Y` away from the blow-up of a near-singular `P`.
pub const P_FLOOR: f64 = 0.1;

/// Joint search over `P ⪰ P_FLOOR·I` with `trace(P) = m`, diagonal `Q ⪰ εI`
/// and free `Y`.
///
/// The LMI is homogeneous: scaling `(Q, Y)` by `α` at fixed `P` turns a
/// certificate for rate `c` into one for `αc`. So any feasible direction
/// certifies every `c_r`, with `‖K‖` growing in proportion. After the
/// search, `(Q, Y)` is rescaled so that `K` is [`GAIN_HEADROOM`] times the
/// smallest gain on that ray which certifies `c_r`.
pub fn synthesize_gain(plant: &PlantModel, c_r: f64, opts: &SolverOptions) -> Result<GainResult> {
    if !(c_r > 0.0 && c_r.is_finite()) {
        return Err(Error::InvalidRate(format!(
            "reduced rate c_r = {c_r} must be positive"
        )));
    }
    let (n, m, pp) = (plant.state_dim(), plant.input_dim(), plant.output_dim());
    let blocks = vec![VarBlock::Sym(m), VarBlock::Diag(n), VarBlock::Free(m, pp)];
    let mut base = Vec::new();
    for i in 0..m {
        for j in i..m {
            base.push(if i == j { 1.0 } else { 0.0 });
        }
    }
    base.extend(std::iter::repeat_n(1.0, n));
    // Start from the Y that best cancels Z at Q = I.
    let c_pinv = plant
        .c
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let y0 = matmul(&z_block(plant, &DiagPosMatrix::identity(n)), &c_pinv);
    for i in 0..m {
        for j in 0..pp {
            base.push(y0[(i, j)]);
        }
    }
    let norm = Normalization::new(vec![0], m as f64);
    let problem = FeasibilityProblem::from_affine_map(blocks, Some(norm), opts.eps, base, |d| {
        let p = SymMatrix::new(d.sym(0))?;
        let q = DiagPosMatrix::new(d.diag(1))?;
        let lmi = assemble_gain_lmi(plant, &p, &q, &d.free(2), c_r)?.into_matrix();
        let k = lmi.nrows();
        let mut out = DMatrix::zeros(k + m, k + m);
        out.view_mut((0, 0), (k, k)).copy_from(&lmi);
        out.view_mut((k, k), (m, m))
            .copy_from(&(DMatrix::identity(m, m) * P_FLOOR - p.as_matrix()));
        Ok(out)
    })?;
    let mut opts = opts.clone();
    opts.stop_at.get_or_insert(-10.0 * opts.strict_tol);
    let res = min_lambda_max(&problem, &opts)?;
    if res.status != FeasibilityStatus::Feasible {
        return Err(Error::NotFound(res.margin));
    }
    let d = problem.decision(&res.theta);
    let p = SymMatrix::new(d.sym(0))?;
    let mut q = DiagPosMatrix::new(d.diag(1))?;
    let mut y = d.free(2);
    let c_max = certified_reduced_rate(plant, &p, &q, &y)?;
    let alpha = GAIN_HEADROOM * c_r / c_max;
    if alpha < 1.0 {
        q = q.scale(alpha)?;
        y *= alpha;
    }
    let margin = lambda_max(&assemble_gain_lmi(plant, &p, &q, &y, c_r)?)?;
    if margin >= 0.0 {
        return Err(Error::NotFound(margin));
    }
    let p_inv = spd_inverse(&p).map_err(|_| Error::SingularP)?;
    let k = matmul(&p_inv, &y);
    Ok(GainResult {
        k,
        p,
        q,
        y,
        c_r,
        margin,
    })
}

/// Largest `c_r` certified by a fixed `(P, Q, Y)`, by bisection to relative
/// precision `1e-9`. `InfeasibleAtAllRates` if the LMI fails as `c_r → 0`.
pub fn certified_reduced_rate(
    plant: &PlantModel,
    p: &SymMatrix,
    q: &DiagPosMatrix,
    y: &GeneralMatrix,
) -> Result<f64> {
    let holds =
        |c: f64| -> Result<bool> { Ok(lambda_max(&assemble_gain_lmi(plant, p, q, y, c)?)? <= 0.0) };
    if !holds(0.0)? {
        return Err(Error::InfeasibleAtAllRates);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while holds(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NumericalFailure("reduced rate is unbounded".into()));
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Outcome of [`dc_gain_check`] for `G = K·C·A⁻¹·B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcGainCheck {
    /// Every eigenvalue of `−G` has negative real part.
    pub hurwitz: bool,
    /// `λmin(PG + GᵀP − 2c_r·P)`; positive when the matrix inequality holds.
    pub witness: f64,
    /// Largest real part among the eigenvalues of `−G`.
    pub spectral_abscissa: f64,
}

impl DcGainCheck {
    pub fn passed(&self) -> bool {
        self.hurwitz && self.witness > 0.0
    }

    /// The inequality implies the Hurwitz property; a mismatch flags a
    /// numerical problem.
    pub fn consistent(&self) -> bool {
        self.witness.is_nan() || self.witness <= 0.0 || self.hurwitz
    }
}

pub fn dc_gain_check(plant: &PlantModel, gain: &GainResult) -> Result<DcGainCheck> {
    let g = matmul(&matmul(&gain.k, &plant.c), &plant.a_inv_b()?);
    if g.nrows() != gain.p.dim() {
        return Err(Error::DimensionMismatch("gain does not match plant".into()));
    }
    let pg = matmul(&gain.p, &g);
    let lhs = &pg + pg.transpose() - gain.p.as_matrix() * (2.0 * gain.c_r);
    let witness = lambda_min(&SymMatrix::new((&lhs + lhs.transpose()) * 0.5)?)?;
    let abscissa = (-g)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DcGainCheck {
        hurwitz: abscissa < 0.0,
        witness,
        spectral_abscissa: abscissa,
    })
}
