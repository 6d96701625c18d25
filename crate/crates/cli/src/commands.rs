//! One function per subcommand. Each returns the report, the exit code and
//! an optional CSV trace; file reads go through [`Inputs`] so that the
//! runner can hash them even when a command fails.

use contractivity::conditions::{
    check, default_check_tol, Architecture, Certificate, ConditionId, Nonlinearity, Rate,
    TimeDomain,
};
use contractivity::control::{
    certified_reduced_rate, dc_gain_check, synthesize_gain, GainResult, PlantModel,
};
use contractivity::feasibility::{find_certificate, SolverOptions};
use contractivity::linalg::{max_abs, DiagPosMatrix, SymMatrix};
use contractivity::param::{generate, invert, sample_seed, ParamSeed};
use contractivity::sim::{
    empirical_rate, simulate_ct, simulate_dt, step_ratios, track, Activation, Horizon, SimTrace,
};
use contractivity::structure::{cone_to_mone, disc_to_cts, dualize, DualityMap, PTransform};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cli::{
    ArchFlag, CertifyArgs, NlFlag, ParamGenArgs, ParamInvertArgs, SimulateArgs, SynthArgs,
    TimeFlag, TrackArgs, TransformArgs, TransformKind,
};
use crate::error::{CliError, CliResult};
use crate::files::{parse_err, Inputs, MatrixFile};
use crate::report::{CertificateJson, Report};

/// Environment variable overriding the default check tolerance.
pub const TOL_ENV: &str = "CONTRACTION_CERT_TOL";

pub struct Outcome {
    pub report: Report,
    pub exit: i32,
    /// `(path, csv)` to write next to the report.
    pub trace: Option<(String, String)>,
}

impl Outcome {
    fn new(report: Report, ok: bool) -> Self {
        Self {
            report,
            exit: if ok { 0 } else { 2 },
            trace: None,
        }
    }
}

/// Explicit flag, then [`TOL_ENV`], then `default_check_tol(n)` scaled by
/// `1 + max|P| + max q`.
pub fn tolerance(flag: Option<f64>, n: usize, scale: f64) -> CliResult<f64> {
    if let Some(t) = flag {
        if !t.is_finite() {
            return Err(CliError::Usage(format!("--tol {t} must be finite")));
        }
        return Ok(t);
    }
    match std::env::var(TOL_ENV) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .ok_or_else(|| CliError::Usage(format!("{TOL_ENV}={v} is not a finite number"))),
        Err(std::env::VarError::NotPresent) => Ok(default_check_tol(n) * (1.0 + scale)),
        Err(e) => Err(CliError::Usage(format!("{TOL_ENV}: {e}"))),
    }
}

fn pq_scale(p: &SymMatrix, q: &DiagPosMatrix) -> f64 {
    max_abs(p.as_matrix()) + q.diag().iter().fold(0.0_f64, |a, v| a.max(*v))
}

fn condition(arch: ArchFlag, time: TimeFlag, nl: NlFlag) -> ConditionId {
    ConditionId::new(
        match arch {
            ArchFlag::Fr => Architecture::FiringRate,
            ArchFlag::Hop => Architecture::Hopfield,
        },
        match time {
            TimeFlag::Ct => TimeDomain::Continuous,
            TimeFlag::Dt => TimeDomain::Discrete,
        },
        match nl {
            NlFlag::Cone => Nonlinearity::Cone,
            NlFlag::Mone => Nonlinearity::Mone,
        },
    )
}

fn solver(seed: u64) -> SolverOptions {
    SolverOptions {
        seed,
        ..SolverOptions::default()
    }
}

fn read_matrix(inputs: &mut Inputs, path: &str) -> CliResult<DMatrix<f64>> {
    inputs
        .read_json::<MatrixFile>(path)?
        .to_general()
        .map_err(parse_err(path))
}

pub fn certify(a: &CertifyArgs, inputs: &mut Inputs) -> CliResult<Outcome> {
    let w = read_matrix(inputs, &a.w)?;
    if w.nrows() != w.ncols() || w.nrows() == 0 {
        return Err(CliError::Parse {
            path: a.w.clone(),
            message: format!(
                "W must be square and non-empty, got {}x{}",
                w.nrows(),
                w.ncols()
            ),
        });
    }
    let n = w.nrows();
    let cond = condition(a.cond, a.time, a.nl);
    let rate = Rate::for_time(cond.time, a.rate).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut report = Report::new("certify", a.common.seed).cell(cond, rate);

    if let (Some(p_path), Some(q_path)) = (&a.p, &a.q) {
        let p = inputs
            .read_json::<MatrixFile>(p_path)?
            .to_sym()
            .map_err(parse_err(p_path))?;
        let q = inputs
            .read_json::<MatrixFile>(q_path)?
            .to_diag()
            .map_err(parse_err(q_path))?;
        let tol = tolerance(a.tol, n, pq_scale(&p, &q))?;
        let (holds, margin) =
            check(cond, &w, &p, &q, rate, tol).map_err(|e| CliError::Usage(e.to_string()))?;
        report.margin = Some(margin);
        report.note("tolerance", tol);
        report.note("mode", "check");
        report.status = if holds { "certified" } else { "not_certified" }.into();
        if holds {
            report = report.with_certificate(&Certificate::checked(cond, w, p, q, rate, tol)?);
        }
        return Ok(Outcome::new(report, holds));
    }

    let search = find_certificate(cond, &w, rate, &solver(a.common.seed))?;
    report.margin = Some(search.margin);
    report.note("mode", "search");
    report.note("solver_status", format!("{:?}", search.status));
    report.note("restarts_used", search.restarts_used);
    let accepted = match &search.certificate {
        Some(cert) => {
            let tol = tolerance(a.tol, n, pq_scale(cert.p(), cert.q()))?;
            report.note("tolerance", tol);
            check(cond, cert.w(), cert.p(), cert.q(), rate, tol)?
                .0
                .then_some(cert)
        }
        None => None,
    };
    report.status = if accepted.is_some() {
        "certified"
    } else {
        "not_found"
    }
    .into();
    if let Some(cert) = accepted {
        report = report.with_certificate(cert);
    }
    Ok(Outcome::new(report, accepted.is_some()))
}

/// `(d, S, V, c)` as stored in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedJson {
    pub d: Vec<f64>,
    #[serde(rename = "S")]
    pub s: MatrixFile,
    #[serde(rename = "V")]
    pub v: MatrixFile,
    pub c: f64,
}

impl SeedJson {
    fn from_seed(seed: &ParamSeed) -> Self {
        Self {
            d: seed.d.clone(),
            s: MatrixFile::from_matrix(&seed.s),
            v: MatrixFile::from_matrix(&seed.v),
            c: seed.c,
        }
    }
}

pub fn param_gen(a: &ParamGenArgs, _inputs: &mut Inputs) -> CliResult<Outcome> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&a.c) {
        return Err(CliError::Usage(format!("--c {} must lie in [0, 1]", a.c)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let seed = sample_seed(a.n, a.c, &mut rng)?;
    let g = generate(&seed)?;
    let tol = tolerance(None, a.n, pq_scale(&g.p, &g.q))?;
    let cert = g.certificate(tol)?;
    let mut report = Report::new("param gen", a.common.seed).with_certificate(&cert);
    report.status = "generated".into();
    report.margin = Some(cert.margin());
    report.note("tolerance", tol);
    report.note("generator", SeedJson::from_seed(&seed));
    Ok(Outcome::new(report, true))
}

/// Any JSON with `condition`, `rate` and `certificate: {W, P, Q}`; reports
/// of `certify`, `param gen` and `transform` qualify.
#[derive(Debug, Clone, Deserialize)]
pub struct CertificateFile {
    pub condition: String,
    pub rate: f64,
    pub certificate: CertificateJson,
}

pub fn read_certificate(inputs: &mut Inputs, path: &str) -> CliResult<Certificate> {
    let file: CertificateFile = inputs.read_json(path)?;
    let bad = parse_err(path);
    let cond: ConditionId = file
        .condition
        .parse()
        .map_err(|e: contractivity::Error| bad(e.to_string()))?;
    let rate = Rate::for_time(cond.time, file.rate).map_err(|e| bad(e.to_string()))?;
    let w = file.certificate.w.to_general().map_err(&bad)?;
    let p = file.certificate.p.to_sym().map_err(&bad)?;
    let q = file.certificate.q.to_diag().map_err(&bad)?;
    if w.nrows() != w.ncols() || p.dim() != w.nrows() || q.dim() != w.nrows() {
        return Err(bad(format!(
            "W {}x{}, P {}, Q {} do not match",
            w.nrows(),
            w.ncols(),
            p.dim(),
            q.dim()
        )));
    }
    let tol = tolerance(None, w.nrows(), pq_scale(&p, &q))?;
    Ok(Certificate::checked(cond, w, p, q, rate, tol)?)
}

pub fn param_invert(a: &ParamInvertArgs, inputs: &mut Inputs) -> CliResult<Outcome> {
    let cert = read_certificate(inputs, &a.cert)?;
    if cert.cond() != ConditionId::FR_CT_MONE {
        return Err(CliError::Usage(format!(
            "invert needs an FR/CT/MONE certificate, got {}",
            cert.cond()
        )));
    }
    let seed = invert(&cert)?;
    let back = generate(&seed)?;
    let mut report = Report::new("param invert", a.common.seed).with_certificate(&cert);
    report.status = "inverted".into();
    report.margin = Some(cert.margin());
    report.note("generator", SeedJson::from_seed(&seed));
    report.note("roundtrip_error", max_abs(&(&back.w - cert.w())));
    Ok(Outcome::new(report, true))
}

pub fn transform(a: &TransformArgs, inputs: &mut Inputs) -> CliResult<Outcome> {
    let cert = read_certificate(inputs, &a.cert)?;
    let (name, out) = match a.kind {
        TransformKind::Dual => ("dual", dualize(&cert)?),
        TransformKind::Cone2mone => ("cone2mone", cone_to_mone(&cert)?),
        TransformKind::Disc2cts => ("disc2cts", disc_to_cts(&cert)?),
    };
    let mut report = Report::new("transform", a.common.seed).with_certificate(&out);
    report.status = "transformed".into();
    report.margin = Some(out.margin());
    report.note("transform", name);
    report.note("source_condition", cert.cond().to_string());
    report.note("source_rate", cert.rate().value());
    if a.kind == TransformKind::Dual {
        let scale = match DualityMap::for_cell(cert.cond(), cert.rate())?.p {
            PTransform::Inverse => 1.0,
            PTransform::ScaledInverse(s) => s,
        };
        report.note("p_scale", scale);
    }
    Ok(Outcome::new(report, true))
}

/// Plant description: weights, input and output maps, slope bound and an
/// optional activation (`Blend(delta)` when absent).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantFile {
    #[serde(rename = "W")]
    pub w: MatrixFile,
    #[serde(rename = "B")]
    pub b: MatrixFile,
    #[serde(rename = "C")]
    pub c: MatrixFile,
    pub delta: f64,
    #[serde(default)]
    pub activation: Option<Activation>,
}

fn read_plant(inputs: &mut Inputs, path: &str) -> CliResult<(PlantModel, Activation)> {
    let file: PlantFile = inputs.read_json(path)?;
    let bad = parse_err(path);
    let plant = PlantModel::new(
        file.w.to_general().map_err(&bad)?,
        file.b.to_general().map_err(&bad)?,
        file.c.to_general().map_err(&bad)?,
        file.delta,
    )
    .map_err(|e| bad(e.to_string()))?;
    let act = file.activation.unwrap_or(Activation::Blend(file.delta));
    Ok((plant, act))
}

/// `(K, P, Q, Y, c_r)` as stored in `synth` reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainJson {
    #[serde(rename = "K")]
    pub k: MatrixFile,
    #[serde(rename = "P")]
    pub p: MatrixFile,
    #[serde(rename = "Q")]
    pub q: MatrixFile,
    #[serde(rename = "Y")]
    pub y: MatrixFile,
    pub c_r: f64,
}

pub fn synth(a: &SynthArgs, inputs: &mut Inputs) -> CliResult<Outcome> {
    let (plant, _) = read_plant(inputs, &a.plant)?;
    if !(a.cr > 0.0 && a.cr.is_finite()) {
        return Err(CliError::Usage(format!("--cr {} must be positive", a.cr)));
    }
    let g = synthesize_gain(&plant, a.cr, &solver(a.common.seed))?;
    let dc = dc_gain_check(&plant, &g)?;
    let mut report = Report::new("synth", a.common.seed);
    report.rate = Some(a.cr);
    report.margin = Some(g.margin);
    report.status = if dc.passed() {
        "synthesized"
    } else {
        "dc_gain_failed"
    }
    .into();
    report.certificate = Some(
        serde_json::to_value(GainJson {
            k: MatrixFile::from_matrix(&g.k),
            p: MatrixFile::from_matrix(g.p.as_matrix()),
            q: MatrixFile::from_diag(&g.q),
            y: MatrixFile::from_matrix(&g.y),
            c_r: g.c_r,
        })
        .expect("gain serializes"),
    );
    report.note("dc_gain_hurwitz", dc.hurwitz);
    report.note("dc_gain_witness", dc.witness);
    report.note("dc_gain_spectral_abscissa", dc.spectral_abscissa);
    report.note(
        "certified_reduced_rate",
        certified_reduced_rate(&plant, &g.p, &g.q, &g.y)?,
    );
    Ok(Outcome::new(report, dc.passed()))
}

fn read_gain(inputs: &mut Inputs, path: &str) -> CliResult<GainResult> {
    let value: Value = inputs.read_json(path)?;
    let bad = parse_err(path);
    let body = value.get("certificate").cloned().unwrap_or(value);
    let g: GainJson = serde_json::from_value(body).map_err(|e| bad(e.to_string()))?;
    Ok(GainResult {
        k: g.k.to_general().map_err(&bad)?,
        p: g.p.to_sym().map_err(&bad)?,
        q: g.q.to_diag().map_err(&bad)?,
        y: g.y.to_general().map_err(&bad)?,
        c_r: g.c_r,
        margin: f64::NAN,
    })
}

pub fn track_cmd(a: &TrackArgs, inputs: &mut Inputs) -> CliResult<Outcome> {
    let (plant, act) = read_plant(inputs, &a.plant)?;
    let gain = read_gain(inputs, &a.gain)?;
    let r = DVector::from_vec(a.reference.clone());
    let x0 = DVector::zeros(plant.state_dim());
    let u0 = DVector::zeros(plant.input_dim());
    let res = track(
        &plant, &gain, act, &r, a.eps, &x0, &u0, a.t_end, a.h, a.every,
    )
    .map_err(|e| match e {
        contractivity::Error::DimensionMismatch(_) | contractivity::Error::InvalidArgument(_) => {
            CliError::Usage(e.to_string())
        }
        e => CliError::Domain(e),
    })?;
    let mut report = Report::new("track", a.common.seed);
    report.rate = Some(gain.c_r);
    report.status = if res.tracked {
        "tracked"
    } else {
        "not_tracked"
    }
    .into();
    report.note("final_error", res.final_error);
    report.note("horizon", res.horizon);
    report.note("eps", a.eps);
    report.note("reference", &a.reference);
    report.note("activation", act);
    let mut out = Outcome::new(report, res.tracked);
    out.trace = a.trace.clone().map(|p| (p, res.trace.to_csv()));
    Ok(out)
}

/// Network to simulate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    /// `"FR"` or `"HOP"`.
    pub architecture: String,
    /// `"CT"` or `"DT"`.
    pub time: String,
    #[serde(rename = "W")]
    pub w: MatrixFile,
    #[serde(rename = "B", default)]
    pub b: Option<MatrixFile>,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, Deserialize)]
struct InputFile {
    u: Vec<f64>,
}

pub fn simulate(a: &SimulateArgs, inputs: &mut Inputs) -> CliResult<Outcome> {
    let model: ModelFile = inputs.read_json(&a.model)?;
    let bad = parse_err(&a.model);
    let arch = match model.architecture.to_ascii_uppercase().as_str() {
        "FR" => Architecture::FiringRate,
        "HOP" => Architecture::Hopfield,
        other => return Err(bad(format!("architecture '{other}' is not FR or HOP"))),
    };
    let time = match model.time.to_ascii_uppercase().as_str() {
        "CT" => TimeDomain::Continuous,
        "DT" => TimeDomain::Discrete,
        other => return Err(bad(format!("time '{other}' is not CT or DT"))),
    };
    let w = model.w.to_general().map_err(&bad)?;
    let n = w.nrows();
    let b = match &model.b {
        Some(b) => b.to_general().map_err(&bad)?,
        None => DMatrix::identity(n, n),
    };
    let u = match &a.input {
        Some(path) => DVector::from_vec(inputs.read_json::<InputFile>(path)?.u),
        None => DVector::zeros(b.ncols()),
    };
    let start = |v: &Option<Vec<f64>>| {
        v.clone()
            .map_or_else(|| DVector::zeros(n), DVector::from_vec)
    };
    let usage = |e: contractivity::Error| match e {
        contractivity::Error::DimensionMismatch(_) | contractivity::Error::InvalidArgument(_) => {
            CliError::Usage(e.to_string())
        }
        e => CliError::Domain(e),
    };
    let run = |x0: &DVector<f64>| -> CliResult<SimTrace> {
        match time {
            TimeDomain::Continuous => simulate_ct(
                arch,
                &w,
                &b,
                model.activation,
                &|_| u.clone(),
                x0,
                Horizon::new(a.t_end, a.h).every(a.every),
            ),
            TimeDomain::Discrete => simulate_dt(
                arch,
                &w,
                &b,
                model.activation,
                &|_| u.clone(),
                x0,
                a.t_end.round().max(0.0) as usize,
            ),
        }
        .map_err(usage)
    };
    let first = run(&start(&a.x0))?;
    let mut report = Report::new("simulate", a.common.seed);
    report.status = "simulated".into();
    report.note("samples", first.len());
    report.note("method", first.method);
    report.note("final_state", first.final_state().as_slice());
    if a.y0.is_some() {
        let second = run(&start(&a.y0))?;
        let p = match &a.p {
            Some(path) => inputs
                .read_json::<MatrixFile>(path)?
                .to_sym()
                .map_err(parse_err(path))?,
            None => SymMatrix::identity(n),
        };
        match time {
            TimeDomain::Continuous => {
                report.note("empirical_rate", empirical_rate(&first, &second, &p)?)
            }
            TimeDomain::Discrete => {
                let ratios = step_ratios(&first, &second, &p)?;
                report.note(
                    "max_step_ratio",
                    ratios.iter().fold(0.0_f64, |m, r| m.max(*r)),
                );
            }
        }
    }
    let mut out = Outcome::new(report, true);
    out.trace = a.trace.clone().map(|p| (p, first.to_csv()));
    Ok(out)
}
