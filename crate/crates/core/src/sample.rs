//! Seeded random instances: SPD matrices, rates, strictly feasible
//! certificates for any cell, and plants for gain synthesis.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::conditions::{assemble, Certificate, ConditionId, Rate, TimeDomain};
use crate::control::PlantModel;
use crate::error::{Error, Result};
use crate::linalg::{lambda_max, matmul, DiagPosMatrix, GeneralMatrix, SymMatrix};
use crate::param::{generate, sample_seed};

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Entrywise `N(0, scale²)`.
pub fn gaussian<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    scale: f64,
    rng: &mut R,
) -> GeneralMatrix {
    DMatrix::from_fn(rows, cols, |_, _| scale * normal(rng))
}

/// `AAᵀ/n + 0.1·I` with `A` standard normal.
pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    let a = gaussian(n, n, 1.0, rng);
    let m = matmul(&a, &a.transpose()) / n as f64 + DMatrix::identity(n, n) * 0.1;
    SymMatrix::new(m).expect("AAᵀ is symmetric")
}

/// Positive diagonal with log-normal entries.
pub fn random_diag<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DiagPosMatrix {
    DiagPosMatrix::new((0..n).map(|_| (0.3 * normal(rng)).exp()).collect())
        .expect("exp is positive")
}

/// `c ∈ [0, 0.9)` or `ρ ∈ [0.2, 0.95)`.
pub fn random_rate<R: Rng + ?Sized>(time: TimeDomain, rng: &mut R) -> Rate {
    match time {
        TimeDomain::Continuous => Rate::Ct(rng.random_range(0.0..0.9)),
        TimeDomain::Discrete => Rate::Dt(rng.random_range(0.2..0.95)),
    }
}

fn margin(
    cond: ConditionId,
    w: &GeneralMatrix,
    p: &SymMatrix,
    q: &DiagPosMatrix,
    rate: Rate,
) -> Result<f64> {
    lambda_max(&assemble(cond, w, p, q, rate)?)
}

/// A strictly feasible certificate for `cond`: random `P`, a diagonal `Q`
/// scaled so that `W = 0` is strictly feasible, and `W = 0.9·t*·W₀` where
/// `t*` is the feasibility boundary along a random direction `W₀`.
pub fn random_certificate<R: Rng + ?Sized>(
    cond: ConditionId,
    n: usize,
    rng: &mut R,
) -> Result<Certificate> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let rate = random_rate(cond.time, rng);
    let p = random_spd(n, rng);
    let qdir = random_diag(n, rng);
    let zero = DMatrix::zeros(n, n);
    let mut best: Option<(f64, DiagPosMatrix)> = None;
    for k in 0..=60 {
        let q = qdir.scale(10f64.powf(-3.0 + 0.1 * k as f64))?;
        let m = margin(cond, &zero, &p, &q, rate)? / (p.trace() + q.trace());
        if best.as_ref().is_none_or(|(b, _)| m < *b) {
            best = Some((m, q));
        }
    }
    let (m0, q) = best.expect("grid is non-empty");
    if m0 >= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "{cond}: no strictly feasible scale for W = 0"
        )));
    }
    let w0 = gaussian(n, n, 1.0 / (n as f64).sqrt(), rng);
    let feasible = |t: f64| -> Result<bool> { Ok(margin(cond, &(&w0 * t), &p, &q, rate)? < 0.0) };
    let mut hi = 1.0;
    while feasible(hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Certificate::checked(cond, &w0 * (0.9 * lo), p, q, rate, 0.0)
}

/// Plant with `W` from the weight parameterization at rate `c`, Gaussian
/// `B` (`n × m`) and collocated output `C = Bᵀ`.
pub fn collocated_plant<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    delta: f64,
    c: f64,
    rng: &mut R,
) -> Result<PlantModel> {
    let g = generate(&sample_seed(n, c, rng)?)?;
    let cert = g.certificate(g.check_tol())?;
    let b = gaussian(n, m, 1.0, rng);
    PlantModel::new(g.w, b.clone(), b.transpose(), delta)?.with_certificate(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_cell_samples_strict_certificates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for cond in ConditionId::all() {
            for n in [1, 3, 6] {
                let c = random_certificate(cond, n, &mut rng).unwrap();
                assert!(c.margin() < 0.0, "{cond} n={n}");
                assert!(c.w().amax() > 0.0);
            }
        }
    }
}
