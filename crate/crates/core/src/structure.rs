//! Constructive structural results: inclusions between cells, FR/Hopfield
//! duality, the diagonal-stability reduction of the discrete CONE cells,
//! the Lyapunov-diagonal-stability necessity test, the 2×2 skew obstruction,
//! and the closed-form certificates for symmetric weights.

use nalgebra::DMatrix;

use crate::conditions::{Architecture, Certificate, ConditionId, Nonlinearity, Rate, TimeDomain};
use crate::error::{Error, Result};
use crate::feasibility::{
    min_lambda_max, FeasibilityProblem, FeasibilityStatus, Normalization, SolverOptions, VarBlock,
};
use crate::linalg::{
    default_nsd_tol, lambda_max, matmul, spd_inverse, sym_eig, DiagPosMatrix, GeneralMatrix,
    SymMatrix,
};

/// Re-check tolerance for transformed certificates.
pub const TRANSFORM_TOL: f64 = 1e-7;

/// Same `(W, P, Q, rate)`, re-checked in the MONE cell.
pub fn cone_to_mone(cert: &Certificate) -> Result<Certificate> {
    let cond = cert.cond();
    if cond.nonlinearity != Nonlinearity::Cone {
        return Err(Error::InvalidArgument(format!("{cond} is not a CONE cell")));
    }
    Certificate::checked(
        cond.with_nonlinearity(Nonlinearity::Mone),
        cert.w().clone(),
        cert.p().clone(),
        cert.q().clone(),
        cert.rate(),
        TRANSFORM_TOL,
    )
}

/// `c = (1 − ρ²)/2`.
pub fn disc_rate_to_cts(rho: f64) -> f64 {
    (1.0 - rho * rho) / 2.0
}

/// Same `(W, P, Q)` at `c = (1 − ρ²)/2`, re-checked in the continuous cell.
pub fn disc_to_cts(cert: &Certificate) -> Result<Certificate> {
    let cond = cert.cond();
    let Rate::Dt(rho) = cert.rate() else {
        return Err(Error::InvalidArgument(format!(
            "{cond} is not a discrete-time cell"
        )));
    };
    Certificate::checked(
        cond.with_time(TimeDomain::Continuous),
        cert.w().clone(),
        cert.p().clone(),
        cert.q().clone(),
        Rate::Ct(disc_rate_to_cts(rho)),
        TRANSFORM_TOL,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualDirection {
    FrToHop,
    HopToFr,
}

/// How `P` is mapped by [`dualize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PTransform {
    /// `P ↦ P⁻¹`
    Inverse,
    /// `P ↦ s·P⁻¹` with `s = ρ⁻²`
    ScaledInverse(f64),
}

/// Variable map taking a certificate to its dual cell. `W ↦ Wᵀ` and
/// `Q ↦ Q⁻¹` always apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityMap {
    pub direction: DualDirection,
    pub p: PTransform,
}

impl DualityMap {
    pub fn for_cell(cond: ConditionId, rate: Rate) -> Result<Self> {
        let direction = match cond.architecture {
            Architecture::FiringRate => DualDirection::FrToHop,
            Architecture::Hopfield => DualDirection::HopToFr,
        };
        let p = match rate {
            Rate::Ct(_) => PTransform::Inverse,
            Rate::Dt(rho) if rho > 0.0 => PTransform::ScaledInverse(1.0 / (rho * rho)),
            Rate::Dt(_) => {
                return Err(Error::InvalidRate(
                    "duality needs a discrete factor rho > 0".into(),
                ));
            }
        };
        Ok(Self { direction, p })
    }
}

/// Certificate for `Wᵀ` in the dual architecture at the same rate.
pub fn dualize(cert: &Certificate) -> Result<Certificate> {
    let map = DualityMap::for_cell(cert.cond(), cert.rate())?;
    let p_inv = spd_inverse(cert.p()).map_err(|_| Error::SingularP)?;
    let p = match map.p {
        PTransform::Inverse => p_inv,
        PTransform::ScaledInverse(s) => p_inv.scale(s),
    };
    Certificate::checked(
        cert.cond().dual(),
        cert.w().transpose(),
        p,
        cert.q().inverse(),
        cert.rate(),
        TRANSFORM_TOL,
    )
}

/// Outcome of [`schur_diag_stability`].
#[derive(Debug, Clone)]
pub struct SchurDiagResult {
    pub stable: bool,
    /// `λmax(WᵀQW − ρ²Q)` at the best `Q` found, with `trace(Q) = n`.
    pub margin: f64,
    pub q: Option<DiagPosMatrix>,
    /// `P = Q` in the FR/DT/CONE cell.
    pub firing_rate: Option<Certificate>,
    /// `ρ²P = Q` in the Hop/DT/CONE cell; absent at `ρ = 0`.
    pub hopfield: Option<Certificate>,
}

/// Searches diagonal `Q ≻ 0` with `WᵀQW ⪯ ρ²Q`. `stable = false` means the
/// search failed, not that no such `Q` exists.
pub fn schur_diag_stability(
    w: &GeneralMatrix,
    rho: f64,
    opts: &SolverOptions,
) -> Result<SchurDiagResult> {
    let n = w.nrows();
    if w.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "W must be square, got {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    Rate::Dt(rho).validate()?;
    let problem = FeasibilityProblem::from_affine_map(
        vec![VarBlock::Diag(n)],
        Some(Normalization::new(vec![0], n as f64)),
        opts.eps,
        vec![1.0; n],
        |d| {
            let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.diag(0)));
            let wtqw = matmul(&w.transpose(), &matmul(&q, w));
            Ok(wtqw - q * (rho * rho))
        },
    )?;
    let mut opts = opts.clone();
    opts.stop_at.get_or_insert(-10.0 * opts.strict_tol);
    let res = min_lambda_max(&problem, &opts)?;
    let tol = default_nsd_tol(2 * n);
    let found = res.status != FeasibilityStatus::NotFound;
    if !found {
        return Ok(SchurDiagResult {
            stable: false,
            margin: res.margin,
            q: None,
            firing_rate: None,
            hopfield: None,
        });
    }
    let q = DiagPosMatrix::new(problem.decision(&res.theta).diag(0))?;
    let rate = Rate::Dt(rho);
    let fr = Certificate::checked(
        "FR/DT/CONE".parse()?,
        w.clone(),
        q.to_sym(),
        q.clone(),
        rate,
        tol,
    )?;
    let hop = if rho > 0.0 {
        let p = q.to_sym().scale(1.0 / (rho * rho));
        Some(Certificate::checked(
            "HOP/DT/CONE".parse()?,
            w.clone(),
            p,
            q.clone(),
            rate,
            tol,
        )?)
    } else {
        None
    };
    Ok(SchurDiagResult {
        stable: true,
        margin: res.margin,
        q: Some(q),
        firing_rate: Some(fr),
        hopfield: hop,
    })
}

/// Strictness threshold for [`lds_necessary`].
pub const LDS_STRICT_TOL: f64 = 1e-10;

/// `λmax(WᵀQ + QW − 2Q + 2cP)` and whether it is `≤ −1e-10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdsCheck {
    pub strict: bool,
    pub lambda_max: f64,
}

/// Tests `WᵀQ + QW ≺ 2Q − 2cP` for an FR/CT/MONE certificate. Holds for
/// every strictly feasible certificate; boundary certificates may fail the
/// strict test.
pub fn lds_necessary(cert: &Certificate) -> Result<LdsCheck> {
    if cert.cond() != ConditionId::FR_CT_MONE {
        return Err(Error::InvalidArgument(format!(
            "{} is not FR/CT/MONE",
            cert.cond()
        )));
    }
    let c = cert.rate().value();
    let q = cert.q().to_matrix();
    let qw = matmul(&q, cert.w());
    let m = &qw.transpose() + &qw - &q * 2.0 + cert.p().as_matrix() * (2.0 * c);
    let lmax = lambda_max(&SymMatrix::new(m)?)?;
    Ok(LdsCheck {
        strict: lmax <= -LDS_STRICT_TOL,
        lambda_max: lmax,
    })
}

/// The skew weight used by [`skew_counterexample_vertices`].
pub fn skew_weight() -> GeneralMatrix {
    DMatrix::from_row_slice(2, 2, &[0.0, 4.0, -4.0, 0.0])
}

/// `M(D) = 2P − PDW − WᵀDP`.
pub fn skew_vertex_matrix(p: &SymMatrix, d: &[f64; 2]) -> Result<SymMatrix> {
    let w = skew_weight();
    let dm = DMatrix::from_row_slice(2, 2, &[d[0], 0.0, 0.0, d[1]]);
    let pdw = matmul(p, &matmul(&dm, &w));
    SymMatrix::new(p.as_matrix() * 2.0 - &pdw - pdw.transpose())
}

/// Positive-definiteness of `M(diag(1,0))` and `M(diag(0,1))` for the skew
/// weight `[[0, 4], [−4, 0]]`. The two can never both hold.
pub fn skew_counterexample_vertices(p: &SymMatrix) -> Result<(bool, bool)> {
    if p.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "P must be 2x2, got {0}x{0}",
            p.dim()
        )));
    }
    let lmin = sym_eig(p)?.lambda_min();
    if lmin <= 0.0 {
        return Err(Error::NotPositiveDefinite { lambda_min: lmin });
    }
    let pd = |d: [f64; 2]| -> Result<bool> {
        Ok(sym_eig(&skew_vertex_matrix(p, &d)?)?.lambda_min() > 0.0)
    };
    Ok((pd([1.0, 0.0])?, pd([0.0, 1.0])?))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn alpha(w: &SymMatrix) -> Result<f64> {
    lambda_max(w)
}

/// Boundary-tight FR/CT/MONE certificate for symmetric `W` at
/// `c = min(1, 1 − α(W))`.
///
/// For `α < 0`: `P = −W`, `Q = I`, `c = 1`. For `0 < α < 1`: `Q = 4αI`,
/// `c = 1 − α`, and `P = V diag(s²) Vᵀ` where each eigenvalue `λ` of `W`
/// gives `s = 2α(1 + √(1 − λ/α))`, the positive root of
/// `s²/(4α) − s + λ = 0`, so that `W = P^{1/2} − P/(4α)`.
pub fn symmetric_construction(w: &SymMatrix) -> Result<Certificate> {
    let n = w.dim();
    let eig = sym_eig(w)?;
    let a = eig.lambda_max();
    let (p, q, c) = if a < 0.0 {
        (w.scale(-1.0), DiagPosMatrix::identity(n), 1.0)
    } else if a > 0.0 && a < 1.0 {
        let mut roots = Vec::with_capacity(n);
        for &l in &eig.values {
            let disc = 1.0 - l / a;
            if disc < 0.0 {
                return Err(Error::NoRealRoot(l));
            }
            roots.push(2.0 * a * (1.0 + disc.sqrt()));
        }
        let mut sq = eig.clone();
        sq.values = roots.iter().map(|s| s * s).collect();
        (
            sq.map_spectrum(|v| v),
            DiagPosMatrix::scalar(n, 4.0 * a)?,
            1.0 - a,
        )
    } else {
        return Err(Error::AlphaOutOfRange(a));
    };
    let scale = 1.0
        + crate::linalg::max_abs(p.as_matrix())
        + q.diag().iter().fold(0.0_f64, |m, v| m.max(*v));
    let tol = default_nsd_tol(2 * n) * scale;
    Certificate::checked(
        ConditionId::FR_CT_MONE,
        w.as_matrix().clone(),
        p,
        q,
        Rate::Ct(c),
        tol,
    )
}
