//! WebAssembly bindings behind `www/index.html`. Each export takes plain
//! numbers and returns a JSON string; the `*_json` functions hold the logic
//! and run natively in tests.

use contractivity::conditions::{Architecture, ConditionId, Rate, TimeDomain};
use contractivity::feasibility::{find_certificate, FeasibilityStatus, SolverOptions};
use contractivity::linalg::SymMatrix;
use contractivity::param::{generate, sample_seed};
use contractivity::sim::{empirical_rate, simulate_ct, Activation, Horizon};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
struct CellVerdict {
    condition: String,
    rate: f64,
    certified: bool,
    margin: f64,
}

#[derive(Debug, Serialize)]
struct Generated {
    n: usize,
    c: f64,
    w: Vec<Vec<f64>>,
    margin: f64,
}

#[derive(Debug, Serialize)]
struct Trajectories {
    t: Vec<f64>,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    distance: Vec<f64>,
    rate: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn square(w: &[f64]) -> Result<DMatrix<f64>, String> {
    let n = (w.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != w.len() || w.iter().any(|v| !v.is_finite()) {
        return Err(format!(
            "expected a finite square matrix, got {} entries",
            w.len()
        ));
    }
    Ok(DMatrix::from_row_slice(n, n, w))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// Searches a certificate in all eight cells, at rate `c` for continuous
/// cells and factor `rho` for discrete ones. `w` is row-major.
pub fn certify_json(w: &[f64], c: f64, rho: f64) -> Result<String, String> {
    let w = square(w)?;
    let opts = SolverOptions::default();
    let mut out = Vec::new();
    for cond in ConditionId::all() {
        let rate = match cond.time {
            TimeDomain::Continuous => Rate::Ct(c),
            TimeDomain::Discrete => Rate::Dt(rho),
        };
        rate.validate().map_err(|e| e.to_string())?;
        let s = find_certificate(cond, &w, rate, &opts).map_err(|e| e.to_string())?;
        out.push(CellVerdict {
            condition: cond.to_string(),
            rate: rate.value(),
            certified: s.status != FeasibilityStatus::NotFound,
            margin: s.margin,
        });
    }
    Ok(json(&out))
}

/// Draws contracting weights of size `n` at rate `c`.
pub fn generate_json(n: usize, c: f64, seed: u64) -> Result<String, String> {
    if !(1..=32).contains(&n) || !(0.0..=1.0).contains(&c) {
        return Err("need 1 <= n <= 32 and 0 <= c <= 1".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = generate(&sample_seed(n, c, &mut rng).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let cert = g.certificate(g.check_tol()).map_err(|e| e.to_string())?;
    Ok(json(&Generated {
        n,
        c,
        w: rows(&g.w),
        margin: cert.margin(),
    }))
}

/// Two continuous-time firing-rate (or Hopfield) trajectories under `tanh`
/// with zero input, plus their Euclidean distance and fitted decay rate.
pub fn simulate_json(
    w: &[f64],
    hopfield: bool,
    x0: &[f64],
    y0: &[f64],
    t_end: f64,
) -> Result<String, String> {
    let w = square(w)?;
    let n = w.nrows();
    if x0.len() != n || y0.len() != n {
        return Err(format!("initial states need {n} entries"));
    }
    let arch = if hopfield {
        Architecture::Hopfield
    } else {
        Architecture::FiringRate
    };
    let b = DMatrix::zeros(n, 1);
    let zero = DVector::zeros(1);
    let horizon =
        Horizon::new(t_end, 0.01).every(((t_end / 0.01) / 400.0).ceil().max(1.0) as usize);
    let run = |x: &[f64]| {
        simulate_ct(
            arch,
            &w,
            &b,
            Activation::Tanh,
            &|_| zero.clone(),
            &DVector::from_column_slice(x),
            horizon,
        )
        .map_err(|e| e.to_string())
    };
    let (a, z) = (run(x0)?, run(y0)?);
    let eye = SymMatrix::identity(n);
    let states = |tr: &contractivity::sim::SimTrace| {
        (0..tr.len())
            .map(|k| tr.state(k).iter().copied().collect())
            .collect()
    };
    Ok(json(&Trajectories {
        t: a.times.clone(),
        x: states(&a),
        y: states(&z),
        distance: (0..a.len())
            .map(|k| (a.state(k) - z.state(k)).norm())
            .collect(),
        rate: empirical_rate(&a, &z, &eye).ok(),
    }))
}

#[wasm_bindgen]
pub fn certify(w: Vec<f64>, c: f64, rho: f64) -> Result<String, JsError> {
    certify_json(&w, c, rho).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn generate_weights(n: usize, c: f64, seed: u64) -> Result<String, JsError> {
    generate_json(n, c, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(
    w: Vec<f64>,
    hopfield: bool,
    x0: Vec<f64>,
    y0: Vec<f64>,
    t_end: f64,
) -> Result<String, JsError> {
    simulate_json(&w, hopfield, &x0, &y0, t_end).map_err(|e| JsError::new(&e))
}
