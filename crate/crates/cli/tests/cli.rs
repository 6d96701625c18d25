use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_contractivity"));
    cmd.env_remove("CONTRACTION_CERT_TOL");
    cmd
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "neg.json",
        r#"{"rows":2,"cols":2,"data":[-1,0,0,-1]}"#,
    );
    write(
        dir.path(),
        "eye.json",
        r#"{"rows":2,"cols":2,"data":[1,0,0,1]}"#,
    );
    write(dir.path(), "ones.json", r#"{"diag":[1,1]}"#);
    write(
        dir.path(),
        "skew.json",
        r#"{"rows":2,"cols":2,"data":[0,4,-4,0]}"#,
    );
    write(
        dir.path(),
        "plant.json",
        r#"{"W":{"diag":[0]},"B":{"rows":1,"cols":1,"data":[1]},"C":{"rows":1,"cols":1,"data":[1]},"delta":1.0}"#,
    );
    dir
}

#[test]
fn certify_negative_identity_with_identity_multipliers() {
    let dir = workspace();
    let out = run_in(
        dir.path(),
        &[
            "certify",
            "--cond",
            "FR",
            "--time",
            "CT",
            "--nl",
            "MONE",
            "--W",
            "neg.json",
            "--P",
            "eye.json",
            "--Q",
            "ones.json",
            "--rate",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["status"], "certified");
    assert_eq!(r["margin"], 0.0);
    assert_eq!(r["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn skew_weight_is_not_found() {
    let dir = workspace();
    let out = run_in(
        dir.path(),
        &[
            "certify",
            "--cond",
            "FR",
            "--time",
            "CT",
            "--nl",
            "MONE",
            "--W",
            "skew.json",
            "--rate",
            "0.01",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["status"], "not_found");
}

#[test]
fn out_of_range_factor_is_a_usage_error() {
    let dir = workspace();
    let out = run_in(
        dir.path(),
        &[
            "certify", "--cond", "FR", "--time", "DT", "--nl", "MONE", "--W", "neg.json", "--rate",
            "1.2",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rate"));
}

#[test]
fn malformed_and_missing_files_exit_one() {
    let dir = workspace();
    write(
        dir.path(),
        "bad.json",
        r#"{"rows":2,"cols":2,"data":[1,2,3]}"#,
    );
    for w in ["bad.json", "absent.json"] {
        let out = run_in(
            dir.path(),
            &[
                "certify", "--cond", "FR", "--time", "CT", "--nl", "MONE", "--W", w, "--rate",
                "0.1",
            ],
        );
        assert_eq!(out.status.code(), Some(1), "{w}");
    }
    assert_eq!(
        run_in(dir.path(), &["certify", "--rate", "0.1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn param_gen_is_reproducible_and_certifiable() {
    let dir = workspace();
    let args = ["param", "gen", "--n", "4", "--c", "0.5", "--seed", "7"];
    let a = run_in(dir.path(), &args);
    let b = run_in(dir.path(), &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r = report(&a);
    let cert = &r["certificate"];
    write(dir.path(), "W.json", &cert["W"].to_string());
    write(dir.path(), "P.json", &cert["P"].to_string());
    write(dir.path(), "Q.json", &cert["Q"].to_string());
    let out = run_in(
        dir.path(),
        &[
            "certify", "--cond", "FR", "--time", "CT", "--nl", "MONE", "--W", "W.json", "--P",
            "P.json", "--Q", "Q.json", "--rate", "0.5",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn param_invert_round_trips_generated_weights() {
    let dir = workspace();
    let out = run_in(
        dir.path(),
        &[
            "param", "gen", "--n", "5", "--c", "0.3", "--seed", "3", "--out", "gen.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let out = run_in(dir.path(), &["param", "invert", "--cert", "gen.json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(
        report(&out)["diagnostics"]["roundtrip_error"]
            .as_f64()
            .unwrap()
            <= 1e-6
    );
}

#[test]
fn invert_of_boundary_certificate_is_negative() {
    let dir = workspace();
    // W = -I with P = Q = I at c = 1 has zero margin.
    let cert = r#"{"condition":"FR/CT/MONE","rate":1.0,"certificate":{"W":{"rows":2,"cols":2,"data":[-1,0,0,-1]},"P":{"rows":2,"cols":2,"data":[1,0,0,1]},"Q":{"diag":[1,1]}}}"#;
    write(dir.path(), "edge.json", cert);
    let out = run_in(dir.path(), &["param", "invert", "--cert", "edge.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(report(&out)["status"], "failed");
}

#[test]
fn dual_twice_restores_the_certificate() {
    let dir = workspace();
    run_in(
        dir.path(),
        &[
            "param", "gen", "--n", "3", "--c", "0.4", "--seed", "1", "--out", "gen.json",
        ],
    );
    let once = run_in(
        dir.path(),
        &[
            "transform",
            "dual",
            "--cert",
            "gen.json",
            "--out",
            "dual.json",
        ],
    );
    assert_eq!(once.status.code(), Some(0));
    let dual: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("dual.json")).unwrap()).unwrap();
    assert_eq!(dual["condition"], "HOP/CT/MONE");
    let twice = run_in(dir.path(), &["transform", "dual", "--cert", "dual.json"]);
    let back = report(&twice);
    let orig: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("gen.json")).unwrap()).unwrap();
    for key in ["W", "P"] {
        let a = orig["certificate"][key]["data"].as_array().unwrap();
        let b = back["certificate"][key]["data"].as_array().unwrap();
        for (x, y) in a.iter().zip(b) {
            assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() <= 1e-9);
        }
    }
}

#[test]
fn disc2cts_maps_the_factor_to_a_rate() {
    let dir = workspace();
    // -0.5·I satisfies FR/DT/MONE at rho = 0.6 with P = Q = I.
    let cert = r#"{"condition":"FR/DT/MONE","rate":0.6,"certificate":{"W":{"rows":2,"cols":2,"data":[-0.5,0,0,-0.5]},"P":{"rows":2,"cols":2,"data":[1,0,0,1]},"Q":{"diag":[1,1]}}}"#;
    write(dir.path(), "dt.json", cert);
    let out = run_in(dir.path(), &["transform", "disc2cts", "--cert", "dt.json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&out);
    assert_eq!(r["condition"], "FR/CT/MONE");
    assert!((r["rate"].as_f64().unwrap() - 0.32).abs() <= 1e-15);
}

#[test]
fn synth_and_track_on_the_scalar_plant() {
    let dir = workspace();
    let out = run_in(
        dir.path(),
        &[
            "synth",
            "--plant",
            "plant.json",
            "--cr",
            "0.5",
            "--out",
            "gain.json",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let gain: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("gain.json")).unwrap()).unwrap();
    let k = gain["certificate"]["K"]["data"][0].as_f64().unwrap();
    assert!(k > 0.0);
    assert_eq!(gain["diagnostics"]["dc_gain_hurwitz"], true);
    assert!(
        gain["diagnostics"]["certified_reduced_rate"]
            .as_f64()
            .unwrap()
            >= 0.5
    );

    let out = run_in(
        dir.path(),
        &[
            "track",
            "--plant",
            "plant.json",
            "--gain",
            "gain.json",
            "--ref",
            "0.3",
            "--eps",
            "0.05",
            "--trace",
            "trace.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(report(&out)["diagnostics"]["final_error"].as_f64().unwrap() <= 1e-3);
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x1,u1,y1"));
}

#[test]
fn large_eps_on_a_stiff_plant_is_negative() {
    let dir = workspace();
    write(
        dir.path(),
        "stiff.json",
        r#"{"W":{"rows":2,"cols":2,"data":[-1,0,0,-1]},"B":{"rows":2,"cols":1,"data":[1,1]},"C":{"rows":1,"cols":2,"data":[1,1]},"delta":1.0}"#,
    );
    assert_eq!(
        run_in(
            dir.path(),
            &[
                "synth",
                "--plant",
                "stiff.json",
                "--cr",
                "0.5",
                "--out",
                "gain.json"
            ]
        )
        .status
        .code(),
        Some(0)
    );
    let out = run_in(
        dir.path(),
        &[
            "track",
            "--plant",
            "stiff.json",
            "--gain",
            "gain.json",
            "--ref",
            "0.3",
            "--eps",
            "10",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let status = report(&out)["status"].clone();
    assert!(status == "not_tracked" || status == "failed", "{status}");
}

#[test]
fn simulate_reports_a_rate_for_two_starts() {
    let dir = workspace();
    write(
        dir.path(),
        "model.json",
        r#"{"architecture":"FR","time":"CT","W":{"rows":2,"cols":2,"data":[0.2,0.1,-0.1,0.2]}}"#,
    );
    let out = run_in(
        dir.path(),
        &[
            "simulate",
            "--model",
            "model.json",
            "--x0",
            "1,-1",
            "--y0",
            "-1,0.5",
            "--t-end",
            "5",
            "--trace",
            "sim.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rate = report(&out)["diagnostics"]["empirical_rate"]
        .as_f64()
        .unwrap();
    assert!(rate > 0.5, "{rate}");
    assert!(std::fs::read_to_string(dir.path().join("sim.csv"))
        .unwrap()
        .starts_with("t,x1,x2,u1,u2"));
}

#[test]
fn selftest_passes_and_is_reproducible() {
    let dir = workspace();
    let a = run_in(dir.path(), &["selftest"]);
    let b = run_in(dir.path(), &["selftest"]);
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    assert_eq!(a.stdout, b.stdout);
    assert!(!String::from_utf8_lossy(&a.stderr).contains("FAIL"));
}

#[test]
fn corrupted_tolerance_fails_named_anchor() {
    let dir = workspace();
    let out = bin()
        .current_dir(dir.path())
        .env("CONTRACTION_CERT_TOL", "-1")
        .arg("selftest")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("FAIL negative-symmetric-exact"), "{log}");
    assert_eq!(report(&out)["status"], "failed");
}

#[test]
fn unparsable_tolerance_variable_is_a_usage_error() {
    let dir = workspace();
    let out = bin()
        .current_dir(dir.path())
        .env("CONTRACTION_CERT_TOL", "tight")
        .args([
            "certify",
            "--cond",
            "FR",
            "--time",
            "CT",
            "--nl",
            "MONE",
            "--W",
            "neg.json",
            "--P",
            "eye.json",
            "--Q",
            "ones.json",
            "--rate",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
