//! Firing-rate and Hopfield dynamics in continuous and discrete time,
//! equilibria, empirical contraction rates and closed-loop tracking.
//!
//! | model    | continuous               | discrete            |
//! |----------|--------------------------|---------------------|
//! | FR       | `ẋ = −x + Ψ(Wx + Bu)`    | `x⁺ = Ψ(Wx + Bu)`   |
//! | Hopfield | `ẋ = −x + WΨ(x) + Bu`    | `x⁺ = WΨ(x) + Bu`   |

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conditions::Architecture;
use crate::control::{GainResult, PlantModel};
use crate::error::{Error, Result};
use crate::linalg::{GeneralMatrix, SymMatrix};
use crate::lure::SlopeInterval;

/// Elementwise activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "delta", rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
    /// `δ·s + (1 − δ)·tanh(s)`, slope in `[δ, 1]`.
    Blend(f64),
}

impl Activation {
    pub fn apply(&self, s: f64) -> f64 {
        match *self {
            Activation::Tanh => s.tanh(),
            Activation::Relu => s.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-s).exp()),
            Activation::Identity => s,
            Activation::Blend(d) => d * s + (1.0 - d) * s.tanh(),
        }
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        v.map(|s| self.apply(s))
    }

    /// Declared slope bounds.
    pub fn slope_interval(&self) -> SlopeInterval {
        match *self {
            Activation::Tanh | Activation::Relu | Activation::Sigmoid => SlopeInterval::MONE,
            Activation::Identity => SlopeInterval::new(1.0, 1.0).expect("valid interval"),
            Activation::Blend(d) => SlopeInterval::new(d, 1.0).unwrap_or(SlopeInterval::MONE),
        }
    }
}

/// Recorded trajectory. Rows of `states`, `inputs` and `outputs` match
/// `times`; `outputs` has zero columns for open-loop runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
    pub outputs: DMatrix<f64>,
    pub step: f64,
    pub method: &'static str,
}

impl SimTrace {
    fn recorder(method: &'static str, step: f64, n: usize, m: usize, p: usize) -> Recorder {
        Recorder {
            method,
            step,
            times: Vec::new(),
            rows: Vec::new(),
            dims: (n, m, p),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        self.states.row(k).transpose()
    }

    pub fn final_state(&self) -> DVector<f64> {
        self.state(self.len() - 1)
    }

    /// CSV with header `t,x1..xn,u1..um,y1..yp`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for (prefix, cols) in [
            ("x", self.states.ncols()),
            ("u", self.inputs.ncols()),
            ("y", self.outputs.ncols()),
        ] {
            for i in 1..=cols {
                let _ = write!(out, ",{prefix}{i}");
            }
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t}");
            for m in [&self.states, &self.inputs, &self.outputs] {
                for j in 0..m.ncols() {
                    let _ = write!(out, ",{}", m[(k, j)]);
                }
            }
            out.push('\n');
        }
        out
    }
}

struct Recorder {
    method: &'static str,
    step: f64,
    times: Vec<f64>,
    rows: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)>,
    dims: (usize, usize, usize),
}

impl Recorder {
    fn push(&mut self, t: f64, x: &DVector<f64>, u: &DVector<f64>, y: &DVector<f64>) {
        self.times.push(t);
        self.rows.push((x.clone(), u.clone(), y.clone()));
    }

    fn finish(self) -> SimTrace {
        let (n, m, p) = self.dims;
        let k = self.times.len();
        let states = DMatrix::from_fn(k, n, |i, j| self.rows[i].0[j]);
        let inputs = DMatrix::from_fn(k, m, |i, j| self.rows[i].1[j]);
        let outputs = DMatrix::from_fn(k, p, |i, j| self.rows[i].2[j]);
        SimTrace {
            times: self.times,
            states,
            inputs,
            outputs,
            step: self.step,
            method: self.method,
        }
    }
}

/// Fixed-step grid: `steps = round(t_end / h)`, recording every
/// `record_every` steps plus the final one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t_end: f64,
    pub h: f64,
    pub record_every: usize,
}

pub const DEFAULT_STEP: f64 = 1e-2;

impl Horizon {
    pub fn new(t_end: f64, h: f64) -> Self {
        Self {
            t_end,
            h,
            record_every: 1,
        }
    }

    pub fn every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    fn steps(&self) -> Result<usize> {
        let valid =
            self.h > 0.0 && self.h.is_finite() && self.t_end.is_finite() && self.t_end >= self.h;
        if !valid {
            return Err(Error::InvalidArgument(format!(
                "need h > 0 and T >= h, got h = {}, T = {}",
                self.h, self.t_end
            )));
        }
        Ok((self.t_end / self.h).round() as usize)
    }

    fn records(&self, k: usize, steps: usize) -> bool {
        k.is_multiple_of(self.record_every) || k == steps
    }
}

fn rk4(
    f: &impl Fn(f64, &DVector<f64>) -> DVector<f64>,
    t: f64,
    x: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn finite(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState(step))
    }
}

fn check_network(w: &GeneralMatrix, b: &GeneralMatrix, x0: &DVector<f64>) -> Result<()> {
    let n = w.nrows();
    if w.ncols() != n || b.nrows() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "W {}x{}, B {}x{}, x0 {}",
            w.nrows(),
            w.ncols(),
            b.nrows(),
            b.ncols(),
            x0.len()
        )));
    }
    Ok(())
}

fn check_input(u: &DVector<f64>, m: usize) -> Result<()> {
    if u.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "input has {} entries, B has {m} columns",
            u.len()
        )));
    }
    Ok(())
}

/// Right-hand side of the continuous-time network.
pub fn vector_field(
    arch: Architecture,
    w: &GeneralMatrix,
    b: &GeneralMatrix,
    act: Activation,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> DVector<f64> {
    match arch {
        Architecture::FiringRate => act.apply_vec(&(w * x + b * u)) - x,
        Architecture::Hopfield => w * act.apply_vec(x) + b * u - x,
    }
}

/// One step of the discrete-time network.
pub fn step_map(
    arch: Architecture,
    w: &GeneralMatrix,
    b: &GeneralMatrix,
    act: Activation,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> DVector<f64> {
    match arch {
        Architecture::FiringRate => act.apply_vec(&(w * x + b * u)),
        Architecture::Hopfield => w * act.apply_vec(x) + b * u,
    }
}

/// Fixed-step RK4 integration with input signal `u(t)`.
pub fn simulate_ct(
    arch: Architecture,
    w: &GeneralMatrix,
    b: &GeneralMatrix,
    act: Activation,
    u: &dyn Fn(f64) -> DVector<f64>,
    x0: &DVector<f64>,
    horizon: Horizon,
) -> Result<SimTrace> {
    check_network(w, b, x0)?;
    let steps = horizon.steps()?;
    let (n, m) = (w.nrows(), b.ncols());
    check_input(&u(0.0), m)?;
    let f = |t: f64, x: &DVector<f64>| vector_field(arch, w, b, act, x, &u(t));
    let mut rec = SimTrace::recorder("rk4", horizon.h, n, m, 0);
    let empty = DVector::zeros(0);
    let mut x = x0.clone();
    finite(&x, 0)?;
    rec.push(0.0, &x, &u(0.0), &empty);
    for k in 1..=steps {
        let t = (k - 1) as f64 * horizon.h;
        x = rk4(&f, t, &x, horizon.h);
        finite(&x, k)?;
        if horizon.records(k, steps) {
            let tk = k as f64 * horizon.h;
            rec.push(tk, &x, &u(tk), &empty);
        }
    }
    Ok(rec.finish())
}

/// Iterates the discrete-time map for `steps` steps with input `u(k)`.
pub fn simulate_dt(
    arch: Architecture,
    w: &GeneralMatrix,
    b: &GeneralMatrix,
    act: Activation,
    u: &dyn Fn(usize) -> DVector<f64>,
    x0: &DVector<f64>,
    steps: usize,
) -> Result<SimTrace> {
    check_network(w, b, x0)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let (n, m) = (w.nrows(), b.ncols());
    check_input(&u(0), m)?;
    let mut rec = SimTrace::recorder("map", 1.0, n, m, 0);
    let empty = DVector::zeros(0);
    let mut x = x0.clone();
    finite(&x, 0)?;
    for k in 0..steps {
        let uk = u(k);
        rec.push(k as f64, &x, &uk, &empty);
        x = step_map(arch, w, b, act, &x, &uk);
        finite(&x, k + 1)?;
    }
    rec.push(steps as f64, &x, &u(steps), &empty);
    Ok(rec.finish())
}

/// Equilibrium of the firing-rate network.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Damping in effect when the iteration stopped.
    pub damping: f64,
}

pub const FIXED_POINT_DAMPING: f64 = 0.5;
pub const FIXED_POINT_CAP: usize = 100_000;

/// Solves `x = Ψ(Wx + Bu)` by the damped iteration
/// `x ← (1 − h)x + h·Ψ(Wx + Bu)` starting from `h = 0.5`. The damping is
/// halved whenever the residual blows up or stalls, since a forward-Euler
/// step of a contracting flow only converges for small enough `h`.
pub fn fixed_point(
    w: &GeneralMatrix,
    b: &GeneralMatrix,
    act: Activation,
    u: &DVector<f64>,
    tol: f64,
    x0: Option<&DVector<f64>>,
) -> Result<FixedPoint> {
    let n = w.nrows();
    let x_init = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    check_network(w, b, &x_init)?;
    check_input(u, b.ncols())?;
    let bu = b * u;
    let image = |x: &DVector<f64>| act.apply_vec(&(w * x + &bu));
    let mut h = FIXED_POINT_DAMPING;
    let mut x = x_init;
    let mut best = (f64::INFINITY, x.clone());
    let mut since_best = 0;
    for it in 0..FIXED_POINT_CAP {
        let fx = image(&x);
        let residual = (&x - &fx).amax();
        if residual <= tol {
            return Ok(FixedPoint {
                x,
                residual,
                iterations: it,
                damping: h,
            });
        }
        if residual < best.0 {
            best = (residual, x.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        if !residual.is_finite() || residual > 1e3 * best.0 || since_best > 200 {
            h *= 0.5;
            x = best.1.clone();
            since_best = 0;
            if h < 1e-8 {
                break;
            }
            continue;
        }
        x = &x * (1.0 - h) + fx * h;
    }
    Err(Error::NoConvergence(best.0))
}

/// `‖v‖_P = √(vᵀPv)`.
pub fn p_norm(p: &SymMatrix, v: &DVector<f64>) -> f64 {
    (v.transpose() * p.as_matrix() * v)[(0, 0)].max(0.0).sqrt()
}

const DISTANCE_FLOOR: f64 = 1e-12;

fn distances(a: &SimTrace, b: &SimTrace, p: &SymMatrix) -> Result<Vec<f64>> {
    if a.times != b.times || a.states.ncols() != b.states.ncols() {
        return Err(Error::DimensionMismatch(
            "traces are on different grids".into(),
        ));
    }
    if p.dim() != a.states.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "P is {0}x{0}, state has {1} entries",
            p.dim(),
            a.states.ncols()
        )));
    }
    Ok((0..a.len())
        .map(|k| p_norm(p, &(a.state(k) - b.state(k))))
        .collect())
}

/// `−slope` of the least-squares line through `log ‖xₐ(t) − x_b(t)‖_P` over
/// the prefix where the distance exceeds `1e-12`.
pub fn empirical_rate(a: &SimTrace, b: &SimTrace, p: &SymMatrix) -> Result<f64> {
    let d = distances(a, b, p)?;
    let pts: Vec<(f64, f64)> = a
        .times
        .iter()
        .zip(&d)
        .take_while(|(_, &v)| v > DISTANCE_FLOOR)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if d.first().is_none_or(|&v| v <= DISTANCE_FLOOR) {
        return Err(Error::DegenerateTraces("initial states coincide"));
    }
    if pts.len() < 2 {
        return Err(Error::DegenerateTraces(
            "fewer than two samples above the distance floor",
        ));
    }
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    Ok(-sxy / sxx)
}

/// Ratios `‖Δx_{k+1}‖_P / ‖Δx_k‖_P` while the distance exceeds `1e-12`.
pub fn step_ratios(a: &SimTrace, b: &SimTrace, p: &SymMatrix) -> Result<Vec<f64>> {
    let d = distances(a, b, p)?;
    if d.first().is_none_or(|&v| v <= DISTANCE_FLOOR) {
        return Err(Error::DegenerateTraces("initial states coincide"));
    }
    Ok(d.windows(2)
        .take_while(|w| w[0] > DISTANCE_FLOOR)
        .map(|w| w[1] / w[0])
        .collect())
}

pub const TRACKING_TOL: f64 = 1e-3;

/// Outcome of [`track`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub trace: SimTrace,
    /// `‖r − y(T)‖∞`.
    pub final_error: f64,
    pub tracked: bool,
    pub horizon: f64,
}

/// Default horizon `10 / (ε·c_r)`.
pub fn default_track_horizon(eps: f64, c_r: f64) -> f64 {
    10.0 / (eps * c_r)
}

/// Integrates `ẋ = −x + Ψ(Wx + Bu)`, `u̇ = εK(r − Cx)` with RK4.
/// `t_end = None` uses [`default_track_horizon`].
#[allow(clippy::too_many_arguments)]
pub fn track(
    plant: &PlantModel,
    gain: &GainResult,
    act: Activation,
    r: &DVector<f64>,
    eps: f64,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    t_end: Option<f64>,
    h: f64,
    record_every: usize,
) -> Result<TrackResult> {
    let (n, m, p) = (plant.state_dim(), plant.input_dim(), plant.output_dim());
    if x0.len() != n || u0.len() != m || r.len() != p || gain.k.shape() != (m, p) {
        return Err(Error::DimensionMismatch(
            "closed-loop dimensions do not match the plant".into(),
        ));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} must be positive"
        )));
    }
    let t_end = t_end.unwrap_or_else(|| default_track_horizon(eps, gain.c_r));
    let horizon = Horizon::new(t_end, h).every(record_every);
    let steps = horizon.steps()?;
    let (w, b, c, k) = (plant.w(), plant.b(), plant.c(), &gain.k);
    let f = |_t: f64, z: &DVector<f64>| {
        let x = z.rows(0, n).into_owned();
        let u = z.rows(n, m).into_owned();
        let dx = act.apply_vec(&(w * &x + b * &u)) - &x;
        let du = k * (r - c * &x) * eps;
        let mut out = DVector::zeros(n + m);
        out.rows_mut(0, n).copy_from(&dx);
        out.rows_mut(n, m).copy_from(&du);
        out
    };
    let mut z = DVector::zeros(n + m);
    z.rows_mut(0, n).copy_from(x0);
    z.rows_mut(n, m).copy_from(u0);
    finite(&z, 0)?;
    let mut rec = SimTrace::recorder("rk4-closed-loop", h, n, m, p);
    let split = |z: &DVector<f64>| (z.rows(0, n).into_owned(), z.rows(n, m).into_owned());
    let (x, u) = split(&z);
    rec.push(0.0, &x, &u, &(c * &x));
    for step in 1..=steps {
        z = rk4(&f, 0.0, &z, h);
        finite(&z, step)?;
        if horizon.records(step, steps) {
            let (x, u) = split(&z);
            rec.push(step as f64 * h, &x, &u, &(c * &x));
        }
    }
    let (x, _) = split(&z);
    let final_error = (r - c * x).amax();
    Ok(TrackResult {
        trace: rec.finish(),
        final_error,
        tracked: final_error <= TRACKING_TOL,
        horizon: t_end,
    })
}

/// Integrates the slow dynamics `u̇ = K(r − C·x*(u))` directly, solving the
/// equilibrium at every stage to `fp_tol`. States of the trace are `u`;
/// outputs are `C·x*(u)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_reduced(
    plant: &PlantModel,
    gain: &GainResult,
    act: Activation,
    r: &DVector<f64>,
    u0: &DVector<f64>,
    horizon: Horizon,
    fp_tol: f64,
) -> Result<SimTrace> {
    let (n, m, p) = (plant.state_dim(), plant.input_dim(), plant.output_dim());
    if u0.len() != m || r.len() != p {
        return Err(Error::DimensionMismatch(
            "reduced-dynamics dimensions do not match the plant".into(),
        ));
    }
    let steps = horizon.steps()?;
    let (w, b, c, k) = (plant.w(), plant.b(), plant.c(), &gain.k);
    let warm = std::cell::RefCell::new(DVector::<f64>::zeros(n));
    let equilibrium = |u: &DVector<f64>| -> Result<DVector<f64>> {
        let fp = fixed_point(w, b, act, u, fp_tol, Some(&warm.borrow()))?;
        warm.replace(fp.x.clone());
        Ok(fp.x)
    };
    let failure = std::cell::RefCell::new(None);
    let f = |_t: f64, u: &DVector<f64>| match equilibrium(u) {
        Ok(x) => k * (r - c * x),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            DVector::from_element(m, f64::NAN)
        }
    };
    let mut rec = SimTrace::recorder("rk4-reduced", horizon.h, m, 0, p);
    let empty = DVector::zeros(0);
    let mut u = u0.clone();
    rec.push(0.0, &u, &empty, &(c * equilibrium(&u)?));
    for step in 1..=steps {
        u = rk4(&f, 0.0, &u, horizon.h);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        finite(&u, step)?;
        if horizon.records(step, steps) {
            let y = c * equilibrium(&u)?;
            rec.push(step as f64 * horizon.h, &u, &empty, &y);
        }
    }
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(u: DVector<f64>) -> impl Fn(f64) -> DVector<f64> {
        move |_| u.clone()
    }

    fn s(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn activation_values_and_slopes() {
        assert_eq!(Activation::Relu.apply(-2.0), 0.0);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert_eq!(Activation::Blend(1.0).apply(0.7), 0.7);
        assert_eq!(Activation::Tanh.slope_interval(), SlopeInterval::MONE);
        let b = Activation::Blend(0.2).slope_interval();
        assert_eq!((b.k1(), b.k2()), (0.2, 1.0));
        for a in [
            Activation::Tanh,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Identity,
            Activation::Blend(0.3),
        ] {
            let iv = a.slope_interval();
            for i in -40..40 {
                let (x, y) = (i as f64 * 0.1, i as f64 * 0.1 + 0.037);
                let slope = (a.apply(y) - a.apply(x)) / (y - x);
                assert!(
                    slope >= iv.k1() - 1e-12 && slope <= iv.k2() + 1e-12,
                    "{a:?} at {x}"
                );
            }
        }
    }

    #[test]
    fn linear_decay_matches_closed_form() {
        let b = DMatrix::from_row_slice(2, 1, &[1.0, -2.0]);
        let u = DVector::from_element(1, 0.5);
        let x0 = DVector::from_vec(vec![1.0, 1.0]);
        let tr = simulate_ct(
            Architecture::FiringRate,
            &DMatrix::zeros(2, 2),
            &b,
            Activation::Identity,
            &constant(u.clone()),
            &x0,
            Horizon::new(2.0, 1e-3),
        )
        .unwrap();
        let bu = &b * &u;
        let exact = &bu + (&x0 - &bu) * (-2.0_f64).exp();
        assert!((tr.final_state() - exact).amax() < 1e-8);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let w = s(0.5);
        let b = s(1.0);
        let u = DVector::from_element(1, 1.0);
        let fp = fixed_point(&w, &b, Activation::Tanh, &u, 1e-13, None).unwrap();
        let tr = simulate_ct(
            Architecture::FiringRate,
            &w,
            &b,
            Activation::Tanh,
            &constant(u),
            &fp.x,
            Horizon::new(1.0, 1e-2),
        )
        .unwrap();
        assert!((tr.final_state() - &fp.x).amax() < 1e-10);
    }

    #[test]
    fn diagonal_identity_models_agree() {
        let w = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.3]);
        let b = DMatrix::identity(2, 2);
        let u = constant(DVector::from_vec(vec![0.2, -0.1]));
        let x0 = DVector::from_vec(vec![1.0, -1.0]);
        let fr = simulate_ct(
            Architecture::FiringRate,
            &w,
            &b,
            Activation::Identity,
            &u,
            &x0,
            Horizon::new(1.0, 1e-2),
        )
        .unwrap();
        let hop = simulate_ct(
            Architecture::Hopfield,
            &w,
            &b,
            Activation::Identity,
            &u,
            &x0,
            Horizon::new(1.0, 1e-2),
        )
        .unwrap();
        assert!((fr.states - hop.states).amax() < 1e-14);
    }

    #[test]
    fn rk4_fourth_order() {
        let w = DMatrix::from_row_slice(2, 2, &[0.2, -0.8, 0.6, 0.1]);
        let b = DMatrix::identity(2, 2);
        let u = constant(DVector::from_vec(vec![0.3, 0.1]));
        let x0 = DVector::from_vec(vec![1.0, -0.5]);
        let end = |h: f64| {
            simulate_ct(
                Architecture::FiringRate,
                &w,
                &b,
                Activation::Tanh,
                &u,
                &x0,
                Horizon::new(2.0, h),
            )
            .unwrap()
            .final_state()
        };
        let (a, bb, c) = (end(0.1), end(0.05), end(0.025));
        let ratio = (&a - &bb).amax() / (&bb - &c).amax();
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn discrete_zero_weight_and_linear_scalar() {
        let b = s(2.0);
        let u = |_k: usize| DVector::from_element(1, 0.25);
        let tr = simulate_dt(
            Architecture::FiringRate,
            &s(0.0),
            &b,
            Activation::Tanh,
            &u,
            &DVector::from_element(1, 9.0),
            1,
        )
        .unwrap();
        assert_eq!(tr.state(1)[0], 0.5_f64.tanh());
        let tr = simulate_dt(
            Architecture::FiringRate,
            &s(0.5),
            &s(1.0),
            Activation::Identity,
            &u,
            &DVector::from_element(1, 1.0),
            10,
        )
        .unwrap();
        for k in 0..=10 {
            let exact = 0.5_f64.powi(k as i32) + 0.25 * (1.0 - 0.5_f64.powi(k as i32)) / 0.5;
            assert!((tr.state(k)[0] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_fixed_point_matches_bisection() {
        let fp = fixed_point(
            &s(0.5),
            &s(1.0),
            Activation::Tanh,
            &DVector::from_element(1, 1.0),
            1e-12,
            None,
        )
        .unwrap();
        assert!(fp.residual <= 1e-12);
        let g = |x: f64| x - (0.5 * x + 1.0).tanh();
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((fp.x[0] - lo).abs() < 1e-11);
        let zero = fixed_point(
            &s(0.0),
            &s(1.0),
            Activation::Tanh,
            &DVector::from_element(1, 0.7),
            1e-14,
            None,
        )
        .unwrap();
        assert!((zero.x[0] - 0.7_f64.tanh()).abs() < 1e-14);
    }

    #[test]
    fn strongly_negative_weight_needs_smaller_damping() {
        let fp = fixed_point(
            &s(-5.0),
            &s(1.0),
            Activation::Identity,
            &DVector::from_element(1, 1.0),
            1e-12,
            None,
        )
        .unwrap();
        assert!((fp.x[0] - 1.0 / 6.0).abs() < 1e-11);
        assert!(fp.damping < FIXED_POINT_DAMPING);
    }

    #[test]
    fn non_contracting_fixed_point_fails() {
        let r = fixed_point(
            &s(2.0),
            &s(1.0),
            Activation::Identity,
            &DVector::from_element(1, 1.0),
            1e-12,
            None,
        );
        assert!(matches!(r, Err(Error::NoConvergence(_))));
        let r = fixed_point(
            &s(1.0),
            &s(1.0),
            Activation::Identity,
            &DVector::from_element(1, 1.0),
            1e-12,
            None,
        );
        assert!(matches!(r, Err(Error::NoConvergence(_))));
    }

    #[test]
    fn empirical_rate_of_pure_decay() {
        let w = DMatrix::zeros(2, 2);
        let b = DMatrix::identity(2, 2);
        let u = constant(DVector::from_vec(vec![0.1, 0.2]));
        let hz = Horizon::new(5.0, 1e-2);
        let a = simulate_ct(
            Architecture::FiringRate,
            &w,
            &b,
            Activation::Identity,
            &u,
            &DVector::from_vec(vec![1.0, 0.0]),
            hz,
        )
        .unwrap();
        let c = simulate_ct(
            Architecture::FiringRate,
            &w,
            &b,
            Activation::Identity,
            &u,
            &DVector::from_vec(vec![-1.0, 2.0]),
            hz,
        )
        .unwrap();
        let rate = empirical_rate(&a, &c, &SymMatrix::identity(2)).unwrap();
        assert!((rate - 1.0).abs() < 0.01, "{rate}");
        assert!(matches!(
            empirical_rate(&a, &a, &SymMatrix::identity(2)),
            Err(Error::DegenerateTraces(_))
        ));
    }

    #[test]
    fn scalar_tracking() {
        let one = s(1.0);
        let plant = PlantModel::new(s(0.0), one.clone(), one.clone(), 1.0).unwrap();
        let gain = GainResult {
            k: s(2.0),
            p: SymMatrix::identity(1),
            q: crate::linalg::DiagPosMatrix::identity(1),
            y: s(2.0),
            c_r: 0.5,
            margin: -1.0,
        };
        let r = DVector::from_element(1, 0.3);
        let zero = DVector::zeros(1);
        let res = track(
            &plant,
            &gain,
            Activation::Blend(1.0),
            &r,
            0.05,
            &zero,
            &zero,
            None,
            1e-2,
            100,
        )
        .unwrap();
        assert_eq!(res.horizon, 400.0);
        assert!(res.tracked, "error {}", res.final_error);
    }

    #[test]
    fn saturated_reference_plateaus() {
        let one = s(1.0);
        let plant = PlantModel::new(s(0.0), one.clone(), one.clone(), 0.5).unwrap();
        let gain = GainResult {
            k: s(1.0),
            p: SymMatrix::identity(1),
            q: crate::linalg::DiagPosMatrix::identity(1),
            y: s(1.0),
            c_r: 0.5,
            margin: -1.0,
        };
        let zero = DVector::zeros(1);
        let res = track(
            &plant,
            &gain,
            Activation::Tanh,
            &DVector::from_element(1, 1.5),
            0.05,
            &zero,
            &zero,
            Some(200.0),
            1e-2,
            1000,
        )
        .unwrap();
        assert!(!res.tracked && res.final_error > 0.4);
    }

    #[test]
    fn csv_layout() {
        let tr = simulate_dt(
            Architecture::FiringRate,
            &s(0.0),
            &s(1.0),
            Activation::Identity,
            &|_| DVector::from_element(1, 1.0),
            &DVector::zeros(1),
            1,
        )
        .unwrap();
        assert_eq!(tr.to_csv(), "t,x1,u1\n0,0,1\n1,1,1\n");
    }
}
