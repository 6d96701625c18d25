//! The eight contractivity LMIs for firing-rate (FR) and Hopfield (Hop)
//! networks, in continuous (CT) and discrete (DT) time, for non-expansive
//! (CONE) and monotone non-expansive (MONE) activations.
//!
//! | cell        | block matrix `⪯ 0` |
//! |-------------|--------------------|
//! | FR/DT/CONE  | `[[−ρ²P + WᵀQW, 0], [0, P − Q]]` |
//! | FR/DT/MONE  | `[[−ρ²P, WᵀQ], [QW, P − 2Q]]` |
//! | FR/CT/CONE  | `[[−2(1−c)P + WᵀQW, P], [P, −Q]]` |
//! | FR/CT/MONE  | `[[−2(1−c)P, P + WᵀQ], [P + QW, −2Q]]` |
//! | Hop/DT/CONE | `[[−ρ²P + Q, 0], [0, WᵀPW − Q]]` |
//! | Hop/DT/MONE | `[[−ρ²P, Q], [Q, WᵀPW − 2Q]]` |
//! | Hop/CT/CONE | `[[−2(1−c)P + Q, PW], [WᵀP, −Q]]` |
//! | Hop/CT/MONE | `[[−2(1−c)P, PW + Q], [WᵀP + Q, −2Q]]` |
//!
//! Every block is evaluated in the same floating-point order as the generic
//! Lur'e assembly in [`crate::lure`], so the two routes agree bit for bit.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    block_sym, default_nsd_tol, is_nsd, matmul, DiagPosMatrix, GeneralMatrix, SymMatrix,
};
use crate::lure::{assemble_lure_ct, assemble_lure_dt, LureSystem, MultiplierMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "FR")]
    FiringRate,
    #[serde(rename = "HOP")]
    Hopfield,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeDomain {
    #[serde(rename = "CT")]
    Continuous,
    #[serde(rename = "DT")]
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Nonlinearity {
    #[serde(rename = "CONE")]
    Cone,
    #[serde(rename = "MONE")]
    Mone,
}

/// One of the eight (architecture, time, nonlinearity) cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConditionId {
    pub architecture: Architecture,
    pub time: TimeDomain,
    pub nonlinearity: Nonlinearity,
}

impl ConditionId {
    pub const fn new(
        architecture: Architecture,
        time: TimeDomain,
        nonlinearity: Nonlinearity,
    ) -> Self {
        Self {
            architecture,
            time,
            nonlinearity,
        }
    }

    pub const FR_CT_MONE: ConditionId = ConditionId::new(
        Architecture::FiringRate,
        TimeDomain::Continuous,
        Nonlinearity::Mone,
    );

    pub fn all() -> [ConditionId; 8] {
        use Architecture::*;
        use Nonlinearity::*;
        use TimeDomain::*;
        [
            Self::new(FiringRate, Discrete, Cone),
            Self::new(FiringRate, Discrete, Mone),
            Self::new(FiringRate, Continuous, Cone),
            Self::new(FiringRate, Continuous, Mone),
            Self::new(Hopfield, Discrete, Cone),
            Self::new(Hopfield, Discrete, Mone),
            Self::new(Hopfield, Continuous, Cone),
            Self::new(Hopfield, Continuous, Mone),
        ]
    }

    pub fn with_nonlinearity(self, nonlinearity: Nonlinearity) -> Self {
        Self {
            nonlinearity,
            ..self
        }
    }

    pub fn with_time(self, time: TimeDomain) -> Self {
        Self { time, ..self }
    }

    pub fn dual(self) -> Self {
        let architecture = match self.architecture {
            Architecture::FiringRate => Architecture::Hopfield,
            Architecture::Hopfield => Architecture::FiringRate,
        };
        Self {
            architecture,
            ..self
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.architecture {
            Architecture::FiringRate => "FR",
            Architecture::Hopfield => "HOP",
        };
        let t = match self.time {
            TimeDomain::Continuous => "CT",
            TimeDomain::Discrete => "DT",
        };
        let n = match self.nonlinearity {
            Nonlinearity::Cone => "CONE",
            Nonlinearity::Mone => "MONE",
        };
        write!(f, "{a}/{t}/{n}")
    }
}

impl FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<String> = s
            .split('/')
            .map(|p| p.trim().to_ascii_uppercase())
            .collect();
        let bad = || {
            Error::InvalidArgument(format!(
                "condition '{s}' is not of the form FR|HOP/CT|DT/CONE|MONE"
            ))
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let architecture = match parts[0].as_str() {
            "FR" => Architecture::FiringRate,
            "HOP" => Architecture::Hopfield,
            _ => return Err(bad()),
        };
        let time = match parts[1].as_str() {
            "CT" | "CTS" => TimeDomain::Continuous,
            "DT" | "DISC" => TimeDomain::Discrete,
            _ => return Err(bad()),
        };
        let nonlinearity = match parts[2].as_str() {
            "CONE" => Nonlinearity::Cone,
            "MONE" => Nonlinearity::Mone,
            _ => return Err(bad()),
        };
        Ok(Self::new(architecture, time, nonlinearity))
    }
}

/// Contraction rate `c` (continuous time) or factor `ρ` (discrete time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Rate {
    #[serde(rename = "ct")]
    Ct(f64),
    #[serde(rename = "dt")]
    Dt(f64),
}

impl Rate {
    /// Builds the rate appropriate for `time` and validates its range.
    pub fn for_time(time: TimeDomain, value: f64) -> Result<Self> {
        let r = match time {
            TimeDomain::Continuous => Rate::Ct(value),
            TimeDomain::Discrete => Rate::Dt(value),
        };
        r.validate()?;
        Ok(r)
    }

    /// `c ≥ 0` finite, or `0 ≤ ρ < 1`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Rate::Ct(c) if c.is_finite() && c >= 0.0 => Ok(()),
            Rate::Ct(c) => Err(Error::InvalidRate(format!(
                "continuous rate c = {c} must be finite and >= 0"
            ))),
            Rate::Dt(r) if (0.0..1.0).contains(&r) => Ok(()),
            Rate::Dt(r) => Err(Error::InvalidRate(format!(
                "discrete factor rho = {r} must lie in [0, 1)"
            ))),
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Rate::Ct(v) | Rate::Dt(v) => v,
        }
    }

    pub fn time(&self) -> TimeDomain {
        match self {
            Rate::Ct(_) => TimeDomain::Continuous,
            Rate::Dt(_) => TimeDomain::Discrete,
        }
    }
}

fn validate_inputs(
    cond: ConditionId,
    w: &GeneralMatrix,
    p: &SymMatrix,
    q: &DiagPosMatrix,
    rate: Rate,
) -> Result<()> {
    let n = w.nrows();
    if w.ncols() != n || p.dim() != n || q.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "W {}x{}, P {2}x{2}, Q {3}x{3}",
            w.nrows(),
            w.ncols(),
            p.dim(),
            q.dim()
        )));
    }
    if rate.time() != cond.time {
        return Err(Error::InvalidRate(format!(
            "{cond} needs a {:?} rate",
            cond.time
        )));
    }
    rate.validate()
}

fn zip(a: &DMatrix<f64>, b: &DMatrix<f64>, f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| f(a[(i, j)], b[(i, j)]))
}

/// `−2(1−c)P`, evaluated as `(−P − P) + 2cP`.
fn ct_decay(p: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    p.map(|v| -v - v + 2.0 * c * v)
}

/// `−ρ²P`.
fn dt_decay(p: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    p.map(|v| -(rho * rho * v))
}

/// Condition block matrix (size `2n`) for `cond`.
pub fn assemble(
    cond: ConditionId,
    w: &GeneralMatrix,
    p: &SymMatrix,
    q: &DiagPosMatrix,
    rate: Rate,
) -> Result<SymMatrix> {
    use Architecture::*;
    use Nonlinearity::*;
    use TimeDomain::*;

    validate_inputs(cond, w, p, q, rate)?;
    let n = w.nrows();
    let p = p.as_matrix();
    let qm = q.to_matrix();
    let wt = w.transpose();
    let zero = DMatrix::zeros(n, n);
    let neg_q = qm.map(|v| -v);
    let neg_2q = qm.map(|v| -2.0 * v);
    let decay = match rate {
        Rate::Ct(c) => ct_decay(p, c),
        Rate::Dt(rho) => dt_decay(p, rho),
    };

    let (b11, b12, b22) = match (cond.architecture, cond.time, cond.nonlinearity) {
        (FiringRate, Discrete, Cone) => {
            let wqw = matmul(&wt, &matmul(&qm, w));
            (
                zip(&decay, &wqw, |a, b| a + b),
                zero,
                zip(p, &neg_q, |a, b| a + b),
            )
        }
        (FiringRate, Discrete, Mone) => (decay, matmul(&wt, &qm), zip(p, &neg_2q, |a, b| a + b)),
        (FiringRate, Continuous, Cone) => {
            let wqw = matmul(&wt, &matmul(&qm, w));
            (zip(&decay, &wqw, |a, b| a + b), p.clone(), neg_q)
        }
        (FiringRate, Continuous, Mone) => (decay, zip(p, &matmul(&wt, &qm), |a, b| a + b), neg_2q),
        (Hopfield, Discrete, Cone) => {
            let wpw = matmul(&matmul(&wt, p), w);
            (
                zip(&decay, &qm, |a, b| a + b),
                zero,
                zip(&wpw, &neg_q, |a, b| a + b),
            )
        }
        (Hopfield, Discrete, Mone) => {
            let wpw = matmul(&matmul(&wt, p), w);
            (decay, qm.clone(), zip(&wpw, &neg_2q, |a, b| a + b))
        }
        (Hopfield, Continuous, Cone) => (zip(&decay, &qm, |a, b| a + b), matmul(p, w), neg_q),
        (Hopfield, Continuous, Mone) => (decay, zip(&matmul(p, w), &qm, |a, b| a + b), neg_2q),
    };
    block_sym(&b11, &b12, &b22)
}

/// The same block matrix obtained by specializing the generic Lur'e LMI:
/// FR uses `(A, B, C) = (−I or 0, I, W)`, Hopfield `(−I or 0, W, I)`, with
/// the CONE/MONE multiplier and `λ = 1`.
pub fn assemble_via_lure(
    cond: ConditionId,
    w: &GeneralMatrix,
    p: &SymMatrix,
    q: &DiagPosMatrix,
    rate: Rate,
) -> Result<SymMatrix> {
    validate_inputs(cond, w, p, q, rate)?;
    let n = w.nrows();
    let a = match cond.time {
        TimeDomain::Continuous => -DMatrix::<f64>::identity(n, n),
        TimeDomain::Discrete => DMatrix::zeros(n, n),
    };
    let eye = DMatrix::<f64>::identity(n, n);
    let sys = match cond.architecture {
        Architecture::FiringRate => LureSystem::new(a, eye, w.clone())?,
        Architecture::Hopfield => LureSystem::new(a, w.clone(), eye)?,
    };
    let mult = match cond.nonlinearity {
        Nonlinearity::Cone => MultiplierMatrix::cone(q),
        Nonlinearity::Mone => MultiplierMatrix::mone(q),
    };
    match rate {
        Rate::Ct(c) => assemble_lure_ct(&sys, p, &mult, c, 1.0),
        Rate::Dt(rho) => assemble_lure_dt(&sys, p, &mult, rho, 1.0),
    }
}

/// `(λmax(assemble(..)) ≤ tol, λmax)`.
pub fn check(
    cond: ConditionId,
    w: &GeneralMatrix,
    p: &SymMatrix,
    q: &DiagPosMatrix,
    rate: Rate,
    tol: f64,
) -> Result<(bool, f64)> {
    is_nsd(&assemble(cond, w, p, q, rate)?, tol)
}

/// A checked witness `(W, P, Q, rate)` for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    cond: ConditionId,
    w: GeneralMatrix,
    p: SymMatrix,
    q: DiagPosMatrix,
    rate: Rate,
    margin: f64,
}

impl Certificate {
    /// Checks the LMI and returns the certificate, or
    /// [`Error::ReCheckFailed`] with the offending margin.
    pub fn checked(
        cond: ConditionId,
        w: GeneralMatrix,
        p: SymMatrix,
        q: DiagPosMatrix,
        rate: Rate,
        tol: f64,
    ) -> Result<Self> {
        let (holds, margin) = check(cond, &w, &p, &q, rate, tol)?;
        if !holds {
            return Err(Error::ReCheckFailed(margin));
        }
        Ok(Self {
            cond,
            w,
            p,
            q,
            rate,
            margin,
        })
    }

    pub fn cond(&self) -> ConditionId {
        self.cond
    }

    pub fn w(&self) -> &GeneralMatrix {
        &self.w
    }

    pub fn p(&self) -> &SymMatrix {
        &self.p
    }

    pub fn q(&self) -> &DiagPosMatrix {
        &self.q
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Margin divided by `trace(P) + trace(Q)`, comparable across scalings.
    pub fn normalized_margin(&self) -> f64 {
        self.margin / (self.p.trace() + self.q.trace())
    }
}

/// Result of [`best_rate`]; `capped` is set when the continuous search hit
/// `c = 1` and a larger rate may also be certified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestRate {
    pub rate: Rate,
    pub capped: bool,
}

const RATE_BISECTION_TOL: f64 = 1e-6;

/// Largest certified `c ∈ [0, 1]` or smallest certified `ρ ∈ [0, 1)` for the
/// given `(P, Q)`, by bisection.
pub fn best_rate(
    cond: ConditionId,
    w: &GeneralMatrix,
    p: &SymMatrix,
    q: &DiagPosMatrix,
    tol: f64,
) -> Result<BestRate> {
    let holds = |v: f64| -> Result<bool> {
        Ok(check(cond, w, p, q, Rate::for_time(cond.time, v)?, tol)?.0)
    };
    match cond.time {
        TimeDomain::Continuous => {
            if holds(1.0)? {
                return Ok(BestRate {
                    rate: Rate::Ct(1.0),
                    capped: true,
                });
            }
            if !holds(0.0)? {
                return Err(Error::InfeasibleAtAllRates);
            }
            let (mut lo, mut hi) = (0.0, 1.0);
            while hi - lo > RATE_BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if holds(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(BestRate {
                rate: Rate::Ct(lo),
                capped: false,
            })
        }
        TimeDomain::Discrete => {
            if holds(0.0)? {
                return Ok(BestRate {
                    rate: Rate::Dt(0.0),
                    capped: false,
                });
            }
            let top = 1.0 - 1e-12;
            if !holds(top)? {
                return Err(Error::InfeasibleAtAllRates);
            }
            let (mut lo, mut hi) = (0.0, top);
            while hi - lo > RATE_BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if holds(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(BestRate {
                rate: Rate::Dt(hi),
                capped: false,
            })
        }
    }
}

/// Default check tolerance for an `n × n` weight matrix (assembled size `2n`).
pub fn default_check_tol(n: usize) -> f64 {
    default_nsd_tol(2 * n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn cid(s: &str) -> ConditionId {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        for c in ConditionId::all() {
            assert_eq!(c.to_string().parse::<ConditionId>().unwrap(), c);
        }
        assert!("FR/XT/MONE".parse::<ConditionId>().is_err());
    }

    #[test]
    fn minus_identity_is_boundary_tight_at_unit_rate() {
        let w = -DMatrix::<f64>::identity(2, 2);
        let l = assemble(
            ConditionId::FR_CT_MONE,
            &w,
            &SymMatrix::identity(2),
            &DiagPosMatrix::identity(2),
            Rate::Ct(1.0),
        )
        .unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        expected[(2, 2)] = -2.0;
        expected[(3, 3)] = -2.0;
        assert_eq!(l.as_matrix(), &expected);
        let (ok, margin) = check(
            ConditionId::FR_CT_MONE,
            &w,
            &SymMatrix::identity(2),
            &DiagPosMatrix::identity(2),
            Rate::Ct(1.0),
            1e-12,
        )
        .unwrap();
        assert!(ok);
        assert_eq!(margin, 0.0);
    }

    #[test]
    fn zero_weight_scalar_case() {
        let q = DiagPosMatrix::new(vec![100.0]).unwrap();
        let l = assemble(
            ConditionId::FR_CT_MONE,
            &m(1, 1, &[0.0]),
            &SymMatrix::identity(1),
            &q,
            Rate::Ct(0.99),
        )
        .unwrap();
        assert!((l[(0, 0)] + 0.02).abs() < 1e-14);
        assert_eq!(l[(0, 1)], 1.0);
        assert_eq!(l[(1, 1)], -200.0);
        let (ok, margin) = check(
            ConditionId::FR_CT_MONE,
            &m(1, 1, &[0.0]),
            &SymMatrix::identity(1),
            &q,
            Rate::Ct(0.99),
            0.0,
        )
        .unwrap();
        assert!(ok && margin < 0.0);
    }

    #[test]
    fn zero_weight_discrete_cone() {
        let cond = cid("FR/DT/CONE");
        let l = assemble(
            cond,
            &DMatrix::zeros(2, 2),
            &SymMatrix::identity(2),
            &DiagPosMatrix::identity(2),
            Rate::Dt(0.5),
        )
        .unwrap();
        let expected =
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-0.25, -0.25, 0.0, 0.0]));
        assert_eq!(l.as_matrix(), &expected);
        let (ok, margin) = check(
            cond,
            &DMatrix::zeros(2, 2),
            &SymMatrix::identity(2),
            &DiagPosMatrix::identity(2),
            Rate::Dt(0.5),
            0.0,
        )
        .unwrap();
        assert!(ok);
        assert_eq!(margin, 0.0);
    }

    #[test]
    fn skew_weight_fails_with_identity_certificate() {
        let w = m(2, 2, &[0.0, 4.0, -4.0, 0.0]);
        let (ok, margin) = check(
            ConditionId::FR_CT_MONE,
            &w,
            &SymMatrix::identity(2),
            &DiagPosMatrix::identity(2),
            Rate::Ct(0.1),
            1e-9,
        )
        .unwrap();
        assert!(!ok && margin > 0.0);
        let l = assemble(
            ConditionId::FR_CT_MONE,
            &w,
            &SymMatrix::identity(2),
            &DiagPosMatrix::identity(2),
            Rate::Ct(0.1),
        )
        .unwrap();
        let s = crate::linalg::schur_complement(&l, 2, crate::linalg::Eliminate::Block22).unwrap();
        assert!((s[(0, 0)] - 6.7).abs() < 1e-12 && (s[(1, 1)] - 6.7).abs() < 1e-12);
        assert!(s[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn hopfield_discrete_cone_zero_weight() {
        let q = DiagPosMatrix::scalar(2, 0.5).unwrap();
        let (ok, margin) = check(
            cid("HOP/DT/CONE"),
            &DMatrix::zeros(2, 2),
            &SymMatrix::identity(2),
            &q,
            Rate::Dt(0.8),
            1e-12,
        )
        .unwrap();
        assert!(ok);
        assert!((margin + 0.14).abs() < 1e-12, "{margin}");
    }

    #[test]
    fn lure_route_agrees_on_fixed_instance() {
        let w = m(3, 3, &[0.3, -1.2, 0.7, 2.1, -0.4, 0.05, -0.9, 1.3, 0.2]);
        let p = SymMatrix::new(m(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 0.9])).unwrap();
        let q = DiagPosMatrix::new(vec![0.7, 1.9, 1.1]).unwrap();
        for cond in ConditionId::all() {
            let rate = Rate::for_time(cond.time, 0.37).unwrap();
            let direct = assemble(cond, &w, &p, &q, rate).unwrap();
            let lure = assemble_via_lure(cond, &w, &p, &q, rate).unwrap();
            assert_eq!(direct, lure, "{cond}");
        }
    }

    #[test]
    fn rate_validation() {
        let w = DMatrix::zeros(1, 1);
        let p = SymMatrix::identity(1);
        let q = DiagPosMatrix::identity(1);
        assert!(matches!(
            assemble(cid("FR/DT/CONE"), &w, &p, &q, Rate::Dt(1.2)),
            Err(Error::InvalidRate(_))
        ));
        assert!(matches!(
            assemble(cid("FR/DT/CONE"), &w, &p, &q, Rate::Ct(0.2)),
            Err(Error::InvalidRate(_))
        ));
        assert!(matches!(
            assemble(
                cid("FR/CT/CONE"),
                &DMatrix::zeros(2, 2),
                &p,
                &q,
                Rate::Ct(0.2)
            ),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn best_rate_examples() {
        let w = -DMatrix::<f64>::identity(2, 2);
        let p = SymMatrix::new(-w.clone()).unwrap();
        let r = best_rate(
            ConditionId::FR_CT_MONE,
            &w,
            &p,
            &DiagPosMatrix::identity(2),
            1e-9,
        )
        .unwrap();
        assert_eq!(r.rate, Rate::Ct(1.0));
        assert!(r.capped);

        let q = DiagPosMatrix::new(vec![2.0]).unwrap();
        let r = best_rate(
            ConditionId::FR_CT_MONE,
            &m(1, 1, &[0.5]),
            &SymMatrix::identity(1),
            &q,
            1e-9,
        )
        .unwrap();
        assert!((r.rate.value() - 0.5).abs() < 1e-5, "{:?}", r);

        let r = best_rate(
            cid("FR/DT/CONE"),
            &DMatrix::zeros(2, 2),
            &SymMatrix::identity(2),
            &DiagPosMatrix::identity(2),
            1e-9,
        )
        .unwrap();
        assert_eq!(r.rate, Rate::Dt(0.0));

        let r = best_rate(
            cid("FR/DT/CONE"),
            &m(1, 1, &[2.0]),
            &SymMatrix::identity(1),
            &DiagPosMatrix::identity(1),
            1e-9,
        );
        assert_eq!(r, Err(Error::InfeasibleAtAllRates));
    }
}
