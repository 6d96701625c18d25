//! Dense symmetric linear algebra used by every other module.
//!
//! Storage is `nalgebra::DMatrix<f64>`; the symmetric eigensolver is a
//! Householder tridiagonalization followed by implicit-shift QL, written out
//! here so that every definiteness verdict goes through one code path.
//! Products that feed the LMI assemblers use [`matmul`], a plain
//! row-by-column loop with a fixed summation order, so that two algebraic
//! routes to the same matrix agree bit for bit.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular real matrix (W, B, C, S, V, K, Y, ...).
pub type GeneralMatrix = DMatrix<f64>;

/// Relative asymmetry above which [`SymMatrix::new`] refuses its input.
pub const ASYMMETRY_REL_TOL: f64 = 1e-8;

/// Smallest eigenvalue accepted by [`spd_sqrt`] and friends.
pub const SPD_EPS: f64 = 1e-12;

/// Default tolerance used to decide `M ⪯ 0`.
pub fn default_nsd_tol(n: usize) -> f64 {
    1e-9 * n as f64
}

/// Tolerance for `M == V Λ Vᵀ` style reconstructions.
pub fn reconstruction_tol(m: &DMatrix<f64>) -> f64 {
    1e-10 * m.nrows().max(1) as f64 * max_abs(m).max(1e-300)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn check_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `a · b` with the textbook `Σ_k a[i,k] b[k,j]` order, k ascending.
pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (n, m, p) = (a.nrows(), a.ncols(), b.ncols());
    DMatrix::from_fn(n, p, |i, j| {
        let mut acc = 0.0;
        for k in 0..m {
            acc += a[(i, k)] * b[(k, j)];
        }
        acc
    })
}

/// Square matrix that is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
    asymmetry: f64,
}

impl SymMatrix {
    /// Symmetrizes `(M + Mᵀ)/2`, rejecting inputs whose asymmetry exceeds
    /// `1e-8 · max|entry|`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(&m, "symmetric matrix")?;
        let n = m.nrows();
        let mut asymmetry = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asymmetry = asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        let scale = max_abs(&m);
        if asymmetry > ASYMMETRY_REL_TOL * scale {
            return Err(Error::NotSymmetric(asymmetry));
        }
        let mut s = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(Self { m: s, asymmetry })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
            asymmetry: 0.0,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: DMatrix::zeros(n, n),
            asymmetry: 0.0,
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            asymmetry: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    /// Largest `|M_ij − M_ji|` seen before symmetrization.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: &self.m * s,
            asymmetry: self.asymmetry * s.abs(),
        }
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.m
    }
}

/// Diagonal matrix with strictly positive entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiagPosMatrix {
    diag: Vec<f64>,
}

impl DiagPosMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::DimensionMismatch("empty diagonal".into()));
        }
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("diagonal matrix"));
        }
        if let Some(&bad) = diag.iter().find(|&&v| v <= 0.0) {
            return Err(Error::NotPositiveDefinite { lambda_min: bad });
        }
        Ok(Self { diag })
    }

    pub fn identity(n: usize) -> Self {
        Self { diag: vec![1.0; n] }
    }

    pub fn scalar(n: usize, v: f64) -> Result<Self> {
        Self::new(vec![v; n])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag))
    }

    pub fn to_sym(&self) -> SymMatrix {
        SymMatrix::from_diagonal(&self.diag)
    }

    pub fn inverse(&self) -> Self {
        Self {
            diag: self.diag.iter().map(|v| 1.0 / v).collect(),
        }
    }

    pub fn sqrt(&self) -> Self {
        Self {
            diag: self.diag.iter().map(|v| v.sqrt()).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        Self::new(self.diag.iter().map(|v| v * s).collect())
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for DiagPosMatrix {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiagPosMatrix> for Vec<f64> {
    fn from(d: DiagPosMatrix) -> Vec<f64> {
        d.diag
    }
}

/// Eigen-decomposition `M = V diag(λ) Vᵀ`, eigenvalues ascending and
/// eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn lambda_max(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }

    /// `V f(Λ) Vᵀ`, symmetrized.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let fk = f(lam);
            if fk == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            for i in 0..n {
                let vi = fk * v[i];
                for j in 0..n {
                    out[(i, j)] += vi * v[j];
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        SymMatrix {
            m: out,
            asymmetry: 0.0,
        }
    }
}

/// Symmetric eigen-decomposition by tridiagonalization and implicit QL.
pub fn sym_eig(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.dim();
    let mut v: Vec<f64> = (0..n * n).map(|k| m[(k / n, k % n)]).collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    diagonalize_tridiagonal(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| v[i * n + order[j]]);
    Ok(SymEigen { values, vectors })
}

/// Householder reduction to tridiagonal form, accumulating the transform in `v`.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for &dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let mut g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL on the tridiagonal `(d, e)`; caps total sweeps at `64·n`.
fn diagonalize_tridiagonal(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let cap = 64 * n;
    let mut sweeps = 0usize;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > cap {
                    return Err(Error::NumericalFailure(format!(
                        "symmetric QL did not converge within {cap} sweeps"
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("non-finite eigenvalue".into()));
    }
    Ok(())
}

pub fn lambda_max(m: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(m)?.lambda_max())
}

pub fn lambda_min(m: &SymMatrix) -> Result<f64> {
    Ok(sym_eig(m)?.lambda_min())
}

/// `M ⪯ 0` up to `tol`: returns `(λmax ≤ tol, λmax)`.
pub fn is_nsd(m: &SymMatrix, tol: f64) -> Result<(bool, f64)> {
    let lmax = lambda_max(m)?;
    Ok((lmax <= tol, lmax))
}

/// Unique symmetric positive definite square root.
pub fn spd_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    require_spd(&eig)?;
    Ok(eig.map_spectrum(f64::sqrt))
}

pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    require_spd(&eig)?;
    Ok(eig.map_spectrum(|l| 1.0 / l))
}

pub fn spd_inv_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eig(m)?;
    require_spd(&eig)?;
    Ok(eig.map_spectrum(|l| 1.0 / l.sqrt()))
}

fn require_spd(eig: &SymEigen) -> Result<()> {
    let lmin = eig.lambda_min();
    if lmin < SPD_EPS {
        return Err(Error::NotPositiveDefinite { lambda_min: lmin });
    }
    Ok(())
}

/// Which diagonal block [`schur_complement`] eliminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eliminate {
    /// Returns `D − Bᵀ A⁻¹ B`.
    Block11,
    /// Returns `A − B D⁻¹ Bᵀ`.
    Block22,
}

/// Schur complement of `[[A, B], [Bᵀ, D]]` where `A` is `split × split`.
pub fn schur_complement(m: &SymMatrix, split: usize, which: Eliminate) -> Result<SymMatrix> {
    let n = m.dim();
    if split == 0 || split >= n {
        return Err(Error::DimensionMismatch(format!(
            "split {split} must lie strictly inside 1..{n}"
        )));
    }
    let a = m.view((0, 0), (split, split)).clone_owned();
    let b = m.view((0, split), (split, n - split)).clone_owned();
    let dblk = m.view((split, split), (n - split, n - split)).clone_owned();
    let (keep, cross, elim) = match which {
        Eliminate::Block22 => (a, b.clone(), dblk),
        Eliminate::Block11 => (dblk, b.transpose(), a),
    };
    let lu = elim.clone().lu();
    if lu.determinant().abs() < SPD_EPS {
        return Err(Error::SingularBlock);
    }
    let solved = lu.solve(&cross.transpose()).ok_or(Error::SingularBlock)?;
    SymMatrix::new(keep - cross * solved)
}

/// `[[A, B], [Bᵀ, D]]` from blocks; `A` and `D` must be symmetric.
pub fn block_sym(a: &DMatrix<f64>, b: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<SymMatrix> {
    let (n1, n2) = (a.nrows(), d.nrows());
    if a.ncols() != n1 || d.ncols() != n2 || b.nrows() != n1 || b.ncols() != n2 {
        return Err(Error::DimensionMismatch(format!(
            "blocks {}x{}, {}x{}, {}x{} do not tile a symmetric matrix",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
    m.view_mut((0, 0), (n1, n1)).copy_from(a);
    m.view_mut((0, n1), (n1, n2)).copy_from(b);
    m.view_mut((n1, 0), (n2, n1)).copy_from(&b.transpose());
    m.view_mut((n1, n1), (n2, n2)).copy_from(d);
    SymMatrix::new(m)
}

/// Largest singular value, via the symmetric eigensolver on `AᵀA`.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    let ata = SymMatrix::new(matmul(&a.transpose(), a))?;
    Ok(lambda_max(&ata)?.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(rows: usize, data: &[f64]) -> SymMatrix {
        SymMatrix::new(DMatrix::from_row_slice(rows, rows, data)).unwrap()
    }

    fn reconstruct(e: &SymEigen) -> DMatrix<f64> {
        let l = DMatrix::from_diagonal(&DVector::from_vec(e.values.clone()));
        &e.vectors * l * e.vectors.transpose()
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let e = sym_eig(&SymMatrix::from_diagonal(&[5.0, -2.0])).unwrap();
        assert_eq!(e.values, vec![-2.0, 5.0]);
    }

    #[test]
    fn skew_gram_is_sixteen_identity() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 4.0, -4.0, 0.0]);
        let g = SymMatrix::new(matmul(&w.transpose(), &w)).unwrap();
        let e = sym_eig(&g).unwrap();
        assert_eq!(e.values, vec![16.0, 16.0]);
    }

    #[test]
    fn eigen_reconstructs_and_is_orthonormal() {
        let m = sym(
            4,
            &[
                4.0, 1.0, -2.0, 0.5, //
                1.0, 3.0, 0.0, 1.5, //
                -2.0, 0.0, -1.0, 2.0, //
                0.5, 1.5, 2.0, 0.0,
            ],
        );
        let e = sym_eig(&m).unwrap();
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let err = max_abs(&(reconstruct(&e) - m.as_matrix()));
        assert!(err <= reconstruction_tol(&m), "{err}");
        let orth = e.vectors.transpose() * &e.vectors - DMatrix::<f64>::identity(4, 4);
        assert!(max_abs(&orth) < 1e-12);
    }

    #[test]
    fn nsd_examples() {
        assert_eq!(is_nsd(&SymMatrix::zeros(2), 0.0).unwrap(), (true, 0.0));
        let (ok, lmax) = is_nsd(&sym(2, &[-0.02, 1.0, 1.0, -200.0]), 0.0).unwrap();
        assert!(ok && lmax < 0.0);
        let (ok, lmax) = is_nsd(&sym(2, &[6.7, 0.0, 0.0, 6.7]), 1e-9).unwrap();
        assert!(!ok);
        assert!((lmax - 6.7).abs() < 1e-14);
    }

    #[test]
    fn sqrt_examples() {
        let r = spd_sqrt(&SymMatrix::identity(2)).unwrap();
        assert!(max_abs(&(r.as_matrix() - DMatrix::<f64>::identity(2, 2))) < 1e-15);
        let r = spd_sqrt(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-15 && (r[(1, 1)] - 3.0).abs() < 1e-15);
        assert_eq!(r[(0, 1)], 0.0);
        assert!(matches!(
            spd_sqrt(&SymMatrix::from_diagonal(&[1.0, 0.0])),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn schur_examples() {
        let s = schur_complement(&sym(2, &[-2.0, 1.0, 1.0, -2.0]), 1, Eliminate::Block22).unwrap();
        assert!((s[(0, 0)] + 1.5).abs() < 1e-15);
        let s = schur_complement(&sym(2, &[-1.0, 2.0, 2.0, -4.0]), 1, Eliminate::Block22).unwrap();
        assert!(s[(0, 0)].abs() < 1e-15);
        let bd = sym(3, &[1.0, 2.0, 0.0, 2.0, 5.0, 0.0, 0.0, 0.0, -3.0]);
        let s = schur_complement(&bd, 2, Eliminate::Block22).unwrap();
        assert_eq!(
            s.as_matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0])
        );
        let s = schur_complement(&bd, 2, Eliminate::Block11).unwrap();
        assert_eq!(s[(0, 0)], -3.0);
        assert_eq!(
            schur_complement(&sym(2, &[1.0, 1.0, 1.0, 0.0]), 1, Eliminate::Block22),
            Err(Error::SingularBlock)
        );
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.1, 1.0]);
        assert!(matches!(SymMatrix::new(m), Err(Error::NotSymmetric(_))));
        let m = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(SymMatrix::new(m), Err(Error::NonFinite(_))));
        assert!(DiagPosMatrix::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn one_by_one() {
        let e = sym_eig(&sym(1, &[-3.5])).unwrap();
        assert_eq!(e.values, vec![-3.5]);
        assert_eq!(e.vectors[(0, 0)].abs(), 1.0);
    }
}
