//! Regression anchors with closed-form answers. Every anchor is seeded, so
//! the report is reproducible.

use contractivity::conditions::{
    assemble, assemble_via_lure, best_rate, check, ConditionId, Nonlinearity, Rate, TimeDomain,
};
use contractivity::feasibility::{find_certificate, FeasibilityStatus, SolverOptions};
use contractivity::linalg::{DiagPosMatrix, SymMatrix};
use contractivity::param::{generate, invert, sample_seed};
use contractivity::sample::{gaussian, random_certificate, random_diag, random_rate, random_spd};
use contractivity::structure::{
    cone_to_mone, disc_to_cts, dualize, skew_counterexample_vertices, skew_weight,
    symmetric_construction,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::{tolerance, Outcome};
use crate::error::CliResult;
use crate::report::Report;

/// Verdict of one anchor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Probe = fn(&mut ChaCha8Rng) -> CliResult<Result<String, String>>;

const ANCHORS: [(&str, Probe); 8] = [
    ("skew-vertex-obstruction", skew_vertices),
    ("skew-not-found", skew_not_found),
    ("negative-symmetric-exact", negative_symmetric),
    ("symmetric-log-optimal", symmetric_log_optimal),
    ("direct-lure-agreement", direct_lure_agreement),
    ("duality-round-trip", duality_round_trip),
    ("inclusion-chain", inclusion_chain),
    ("parameterization", parameterization),
];

pub fn anchor_names() -> Vec<&'static str> {
    ANCHORS.iter().map(|(n, _)| *n).collect()
}

/// Runs every anchor with its own generator seeded from `seed` and the
/// anchor index. Errors count as failures.
pub fn run_anchors(seed: u64) -> Vec<Anchor> {
    ANCHORS
        .iter()
        .enumerate()
        .map(|(i, (name, probe))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let (passed, detail) = match probe(&mut rng) {
                Ok(Ok(d)) => (true, d),
                Ok(Err(d)) => (false, d),
                Err(e) => (false, e.to_string()),
            };
            Anchor {
                name,
                passed,
                detail,
            }
        })
        .collect()
}

pub fn selftest(seed: u64, log: &mut dyn std::io::Write) -> CliResult<Outcome> {
    let anchors = run_anchors(seed);
    for a in &anchors {
        let line = if a.passed {
            format!("PASS {}", a.name)
        } else {
            format!("FAIL {}: {}", a.name, a.detail)
        };
        let _ = writeln!(log, "{line}");
    }
    let failed: Vec<&str> = anchors
        .iter()
        .filter(|a| !a.passed)
        .map(|a| a.name)
        .collect();
    let mut report = Report::new("selftest", seed);
    report.status = if failed.is_empty() {
        "passed"
    } else {
        "failed"
    }
    .into();
    report.note("anchors", &anchors);
    report.note("failed", &failed);
    Ok(Outcome {
        exit: if failed.is_empty() { 0 } else { 2 },
        report,
        trace: None,
    })
}

fn skew_vertices(rng: &mut ChaCha8Rng) -> CliResult<Result<String, String>> {
    for k in 0..1000 {
        let p = random_spd(2, rng);
        if skew_counterexample_vertices(&p)? == (true, true) {
            return Ok(Err(format!("draw {k} makes both vertices definite")));
        }
    }
    Ok(Ok("1000 metrics, none clears both vertices".into()))
}

fn skew_not_found(_: &mut ChaCha8Rng) -> CliResult<Result<String, String>> {
    let search = find_certificate(
        ConditionId::FR_CT_MONE,
        &skew_weight(),
        Rate::Ct(0.01),
        &SolverOptions::default(),
    )?;
    Ok(if search.status == FeasibilityStatus::Feasible {
        Err(format!(
            "solver reported a certificate with margin {:e}",
            search.margin
        ))
    } else {
        Ok(format!("best margin {:e}", search.margin))
    })
}

fn negative_symmetric(_: &mut ChaCha8Rng) -> CliResult<Result<String, String>> {
    let n = 3;
    let w = -DMatrix::identity(n, n);
    let tol = tolerance(None, n, 2.0)?;
    let (holds, margin) = check(
        ConditionId::FR_CT_MONE,
        &w,
        &SymMatrix::identity(n),
        &DiagPosMatrix::identity(n),
        Rate::Ct(1.0),
        tol,
    )?;
    Ok(if holds && margin.abs() <= 1e-12 {
        Ok(format!("margin {margin:e}"))
    } else {
        Err(format!("margin {margin:e} at tolerance {tol:e}"))
    })
}

fn symmetric_log_optimal(_: &mut ChaCha8Rng) -> CliResult<Result<String, String>> {
    let w = SymMatrix::from_diagonal(&[0.5, -3.0]);
    let cert = symmetric_construction(&w)?;
    let tol = tolerance(
        None,
        2,
        cert.p().amax() + cert.q().diag().iter().fold(0.0_f64, |a, v| a.max(*v)),
    )?;
    let best = best_rate(cert.cond(), cert.w(), cert.p(), cert.q(), tol)?;
    let gap = (best.rate.value() - 0.5).abs();
    Ok(if gap <= 1e-5 {
        Ok(format!("best rate {}", best.rate.value()))
    } else {
        Err(format!("best rate {} instead of 0.5", best.rate.value()))
    })
}

fn direct_lure_agreement(rng: &mut ChaCha8Rng) -> CliResult<Result<String, String>> {
    for cond in ConditionId::all() {
        for n in 1..=6 {
            let w = gaussian(n, n, 1.0, rng);
            let p = random_spd(n, rng);
            let q = random_diag(n, rng);
            let rate = random_rate(cond.time, rng);
            let direct = assemble(cond, &w, &p, &q, rate)?;
            let lure = assemble_via_lure(cond, &w, &p, &q, rate)?;
            if direct.as_matrix() != lure.as_matrix() {
                return Ok(Err(format!("{cond} differs at n = {n}")));
            }
        }
    }
    Ok(Ok("8 cells agree entry for entry".into()))
}

fn duality_round_trip(rng: &mut ChaCha8Rng) -> CliResult<Result<String, String>> {
    let mut worst = 0.0_f64;
    for cond in ConditionId::all() {
        let cert = random_certificate(cond, 4, rng)?;
        let back = dualize(&dualize(&cert)?)?;
        worst = worst.max((back.w() - cert.w()).amax());
        worst = worst
            .max((back.p().as_matrix() - cert.p().as_matrix()).amax() / (1.0 + cert.p().amax()));
    }
    Ok(if worst <= 1e-9 {
        Ok(format!("worst deviation {worst:e}"))
    } else {
        Err(format!("deviation {worst:e}"))
    })
}

fn inclusion_chain(rng: &mut ChaCha8Rng) -> CliResult<Result<String, String>> {
    for cond in ConditionId::all() {
        let mut cert = random_certificate(cond, 4, rng)?;
        if cert.cond().nonlinearity == Nonlinearity::Cone {
            cert = cone_to_mone(&cert)?;
        }
        if cert.cond().time == TimeDomain::Discrete {
            let rho = cert.rate().value();
            cert = disc_to_cts(&cert)?;
            if (cert.rate().value() - (1.0 - rho * rho) / 2.0).abs() > 1e-15 {
                return Ok(Err(format!(
                    "{cond}: rate {} from rho {rho}",
                    cert.rate().value()
                )));
            }
        }
        if cert.cond().time != TimeDomain::Continuous
            || cert.cond().nonlinearity != Nonlinearity::Mone
        {
            return Ok(Err(format!("{cond} ended in {}", cert.cond())));
        }
    }
    Ok(Ok("every cell reaches the continuous monotone cell".into()))
}

fn parameterization(rng: &mut ChaCha8Rng) -> CliResult<Result<String, String>> {
    let mut worst = 0.0_f64;
    for n in [1, 3, 6, 10] {
        let g = generate(&sample_seed(n, 0.5, rng)?)?;
        let cert = g.certificate(g.check_tol())?;
        let back = generate(&invert(&cert)?)?;
        worst = worst.max((&back.w - &g.w).amax());
    }
    Ok(if worst <= 1e-6 {
        Ok(format!("round-trip error {worst:e}"))
    } else {
        Err(format!("round-trip error {worst:e}"))
    })
}
