//! Exact parameterization of the FR/CT/MONE weight set.
//!
//! Every `W` with an FR/CT/MONE certificate at rate `c` has the form
//! `W = 2√(1−c)·diag(eᵈ)·S·VᵀV − diag(e²ᵈ)·(VᵀV)²` with `SᵀS ⪯ I` and `V`
//! full rank, certified by `P = (VᵀV)²` and `Q = diag(e⁻²ᵈ)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conditions::{Certificate, ConditionId, Rate};
use crate::error::{Error, Result};
use crate::linalg::{
    check_finite, default_nsd_tol, matmul, max_abs, spd_inv_sqrt, spd_sqrt, spectral_norm,
    DiagPosMatrix, GeneralMatrix, SymMatrix,
};

/// Smallest admissible singular value of `V`.
pub const MIN_SIGMA_V: f64 = 1e-8;
/// Slack on `‖S‖₂ ≤ 1` accepted by [`generate`].
pub const SLOPE_SLACK: f64 = 1e-9;
/// Slack on `‖S‖₂ ≤ 1` accepted by [`invert`].
pub const INVERT_SLACK: f64 = 1e-6;

/// Free variables `(d, S, V, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSeed {
    pub d: Vec<f64>,
    pub s: GeneralMatrix,
    pub v: GeneralMatrix,
    pub c: f64,
}

impl ParamSeed {
    /// Builds a seed from unconstrained `(d, X, Y)`: `S = squash(X)` and `V`
    /// is the SPD square root of `psd_shift(Y, ε)`, so `VᵀV = YᵀY + εI`.
    pub fn from_raw(
        d: Vec<f64>,
        x: &GeneralMatrix,
        y: &GeneralMatrix,
        eps: Option<f64>,
        c: f64,
    ) -> Result<Self> {
        let eps = eps.unwrap_or_else(|| default_shift(y));
        let vtv = psd_shift(y, eps)?;
        Ok(Self {
            d,
            s: squash(x)?,
            v: spd_sqrt(&vtv)?.into_matrix(),
            c,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.d.len();
        if n == 0 || self.s.shape() != (n, n) || self.v.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "d has {n} entries, S is {}x{}, V is {}x{}",
                self.s.nrows(),
                self.s.ncols(),
                self.v.nrows(),
                self.v.ncols()
            )));
        }
        if self.d.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("d"));
        }
        check_finite(&self.s, "S")?;
        check_finite(&self.v, "V")?;
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::InvalidRate(format!(
                "c = {} must lie in [0, 1]",
                self.c
            )));
        }
        let s_norm = spectral_norm(&self.s)?;
        if s_norm > 1.0 + SLOPE_SLACK {
            return Err(Error::SlopeBoundViolated(s_norm));
        }
        let sigma_min = self.v.clone().svd(false, false).singular_values.min();
        if sigma_min < MIN_SIGMA_V {
            return Err(Error::RankDeficientV(sigma_min));
        }
        Ok(())
    }
}

/// Output of [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub w: GeneralMatrix,
    pub p: SymMatrix,
    pub q: DiagPosMatrix,
    pub c: f64,
}

impl Generated {
    /// Checks the implied triple in the FR/CT/MONE cell.
    pub fn certificate(&self, tol: f64) -> Result<Certificate> {
        Certificate::checked(
            ConditionId::FR_CT_MONE,
            self.w.clone(),
            self.p.clone(),
            self.q.clone(),
            Rate::Ct(self.c),
            tol,
        )
    }

    /// Check tolerance scaled to the size of `P` and `Q`.
    pub fn check_tol(&self) -> f64 {
        let n = self.w.nrows();
        let qmax = self.q.diag().iter().fold(0.0_f64, |a, v| a.max(*v));
        default_nsd_tol(2 * n) * (1.0 + max_abs(&self.p) + qmax)
    }
}

/// `(W, P, Q)` from a seed.
pub fn generate(seed: &ParamSeed) -> Result<Generated> {
    seed.validate()?;
    let n = seed.dim();
    let vtv = SymMatrix::new(matmul(&seed.v.transpose(), &seed.v))?;
    let p = SymMatrix::new(matmul(&vtv, &vtv))?;
    let ed = DMatrix::from_diagonal(&DVector::from_iterator(n, seed.d.iter().map(|x| x.exp())));
    let e2d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        seed.d.iter().map(|x| (2.0 * x).exp()),
    ));
    let w = matmul(&ed, &matmul(&seed.s, &vtv)) * (2.0 * (1.0 - seed.c).sqrt()) - matmul(&e2d, &p);
    let q = DiagPosMatrix::new(seed.d.iter().map(|x| (-2.0 * x).exp()).collect())?;
    Ok(Generated { w, p, q, c: seed.c })
}

/// `S = X(I + XᵀX)^{−1/2}`, so `SᵀS ⪯ I`.
pub fn squash(x: &GeneralMatrix) -> Result<GeneralMatrix> {
    check_finite(x, "X")?;
    let n = x.ncols();
    let g = SymMatrix::new(DMatrix::identity(n, n) + matmul(&x.transpose(), x))?;
    let r = spd_inv_sqrt(&g)
        .map_err(|e| Error::NumericalFailure(format!("inverse square root in squash: {e}")))?;
    Ok(matmul(x, &r))
}

/// `YᵀY + εI`.
pub fn psd_shift(y: &GeneralMatrix, eps: f64) -> Result<SymMatrix> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "shift eps = {eps} must be positive"
        )));
    }
    check_finite(y, "Y")?;
    let n = y.ncols();
    SymMatrix::new(matmul(&y.transpose(), y) + DMatrix::identity(n, n) * eps)
}

/// `1e-4 · max(trace(YᵀY)/n, 1)`.
pub fn default_shift(y: &GeneralMatrix) -> f64 {
    let n = y.ncols().max(1) as f64;
    1e-4 * (y.norm_squared() / n).max(1.0)
}

/// Recovers the seed from a strictly feasible FR/CT/MONE certificate:
/// `d = −½ log diag(Q)`, `V` = SPD root of `P^{1/2}`, and
/// `S = Q^{−1/2}(P + QW)P^{−1/2} / (2√(1−c))`.
pub fn invert(cert: &Certificate) -> Result<ParamSeed> {
    if cert.cond() != ConditionId::FR_CT_MONE {
        return Err(Error::InvalidArgument(format!(
            "{} is not FR/CT/MONE",
            cert.cond()
        )));
    }
    let c = cert.rate().value();
    if c >= 1.0 {
        return Err(Error::DegenerateRate);
    }
    let p = cert.p();
    let q = cert.q();
    let p_half = spd_sqrt(p).map_err(|_| Error::SingularP)?;
    let v = spd_sqrt(&p_half).map_err(|_| Error::SingularP)?;
    let p_inv_half = spd_inv_sqrt(p).map_err(|_| Error::SingularP)?;
    let qm = q.to_matrix();
    let q_inv_half = q.inverse().sqrt().to_matrix();
    let core = p.as_matrix() + matmul(&qm, cert.w());
    let s = matmul(&matmul(&q_inv_half, &core), &p_inv_half) / (2.0 * (1.0 - c).sqrt());
    let s_norm = spectral_norm(&s)?;
    if s_norm > 1.0 + INVERT_SLACK {
        return Err(Error::SlopeBoundViolated(s_norm));
    }
    let d = q.diag().iter().map(|x| -0.5 * x.ln()).collect();
    // Clamp round-off so the recovered seed passes `generate`'s own check.
    let s = if s_norm > 1.0 { s / s_norm } else { s };
    Ok(ParamSeed {
        d,
        s,
        v: v.into_matrix(),
        c,
    })
}

/// Draws `d ~ N(0, 0.5²)`, `X, Y ~ N(0, 1/n)` entrywise and builds the seed
/// with the default shift.
pub fn sample_seed<R: Rng + ?Sized>(n: usize, c: f64, rng: &mut R) -> Result<ParamSeed> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut normal = |s: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        s * z
    };
    let d = (0..n).map(|_| normal(0.5)).collect();
    let x = DMatrix::from_fn(n, n, |_, _| normal(scale));
    let y = DMatrix::from_fn(n, n, |_, _| normal(scale));
    ParamSeed::from_raw(d, &x, &y, None, c)
}
