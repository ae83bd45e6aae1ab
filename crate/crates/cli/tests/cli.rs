use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavecwt"))
        .current_dir(dir)
        .env_remove("WAVECWT_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_lines(bytes: &[u8]) -> Vec<Value> {
    String::from_utf8_lossy(bytes)
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("not JSON ({e}): {l}")))
        .collect()
}

fn ok(dir: &Path, args: &[&str]) -> Vec<Value> {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    json_lines(&out.stdout)
}

fn shell_inputs(dir: &Path) {
    ok(dir, &["make-field", "--kind", "shell", "--n", "16", "--band", "2,6", "--seed", "1", "--out", "w.wfld"]);
    ok(dir, &["make-field", "--kind", "shell", "--n", "16", "--band", "2,6", "--seed", "2", "--out", "v.wfld"]);
}

#[test]
fn catalog_lists_the_four_wavelets() {
    let dir = tempfile::tempdir().unwrap();
    let names: Vec<String> =
        ok(dir.path(), &["catalog"]).iter().map(|v| v["name"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["kaiser", "exp-spherical", "bateman", "gaussian-packet"]);
}

#[test]
fn admissibility_reports_constant_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let line = &ok(dir.path(), &["admissibility", "--wavelet", "kaiser", "--param", "alpha=4"])[0];
    let re = line["constant"]["re"].as_f64().unwrap();
    assert!((re - 1.5 * PI).abs() < 1e-8 * 1.5 * PI, "{re}");
    assert_eq!(line["converged"], Value::Bool(true));

    let line = &ok(dir.path(), &["admissibility", "--wavelet", "kaiser", "--param", "alpha=1.5"])[0];
    assert_eq!(line["converged"], Value::Bool(false));
    assert_eq!(line["divergence_reason"], "origin");
}

#[test]
fn exit_codes_and_error_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_lines(&out.stderr)[0]["error"], "usage");

    let out = run(dir.path(), &["admissibility", "--wavelet", "kaiser", "--param", "alpha"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(dir.path(), &["admissibility", "--wavelet", "morlet"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_lines(&out.stderr)[0]["error"], "invalid_parameter");

    shell_inputs(dir.path());
    let out = run(dir.path(), &["analyze", "--input", "w.wfld", "--wavelet", "kaiser", "--sign", "minus", "--out", "c.wcf"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_lines(&out.stderr)[0]["error"], "sign_mismatch");

    let out = run(dir.path(), &["verify", "compare", "--a", "w.wfld", "--b", "v.wfld"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_lines(&out.stdout)[0]["pass"], Value::Bool(false));
}

#[test]
fn ivp_wavelet_route_matches_fourier_route() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    shell_inputs(d);
    for method in ["fourier", "wavelet"] {
        ok(d, &["ivp", "--w", "w.wfld", "--v", "v.wfld", "--t", "0.7", "--method", method, "--out", &format!("{method}.wfld")]);
    }
    let line = &ok(d, &["verify", "compare", "--a", "fourier.wfld", "--b", "wavelet.wfld", "--tol", "5e-2"])[0];
    assert_eq!(line["pass"], Value::Bool(true));
}

#[test]
fn analyze_then_synthesize_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    shell_inputs(d);
    let line = &ok(d, &["analyze", "--input", "w.wfld", "--wavelet", "exp-spherical", "--out", "w.wcf"])[0];
    assert_eq!(line["nu_grid"]["symmetry"], "spherical");
    ok(d, &["synthesize", "--coeffs", "w.wcf", "--out", "back.wfld"]);
    let line = &ok(d, &["verify", "compare", "--a", "w.wfld", "--b", "back.wfld", "--tol", "5e-2"])[0];
    assert_eq!(line["pass"], Value::Bool(true));

    let line = &ok(d, &["verify", "isometry", "--input", "w.wfld", "--wavelet", "exp-spherical"])[0];
    assert_eq!(line["pass"], Value::Bool(true));
}

#[test]
fn outputs_are_deterministic_and_manifested() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    shell_inputs(d);
    let mut digests = Vec::new();
    for (threads, out) in [("1", "a.wcf"), ("3", "b.wcf")] {
        let line = &ok(
            d,
            &["--threads", threads, "analyze", "--input", "w.wfld", "--wavelet", "kaiser", "--n-a", "6", "--out", out],
        )[0];
        digests.push(line["sha256"].as_str().unwrap().to_string());
        let manifest: Value =
            serde_json::from_slice(&std::fs::read(d.join(format!("{out}.manifest.json"))).unwrap()).unwrap();
        assert_eq!(manifest["outputs"][out], line["sha256"]);
        assert_eq!(manifest["threads"].as_u64(), Some(threads.parse().unwrap()));
        assert!(manifest["inputs"]["w.wfld"].is_string());
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(std::fs::read(d.join("a.wcf")).unwrap(), std::fs::read(d.join("b.wcf")).unwrap());
}

#[test]
fn residual_checks_from_wavelet_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lines = ok(d, &["verify", "residual", "--wavelet", "gaussian-packet", "--n", "40", "--length", "1.6", "--t", "0.1"]);
    let summary = lines.last().unwrap();
    assert_eq!(summary["pass"], Value::Bool(true));
    let ratio = summary["ratios"][0].as_f64().unwrap();
    assert!((ratio - 4.0).abs() < 0.5, "{ratio}");

    let dt = 0.02;
    for (i, t) in [0.3 - dt, 0.3, 0.3 + dt].iter().enumerate() {
        let t = t.to_string();
        ok(d, &["make-field", "--kind", "wavelet", "--wavelet", "kaiser", "--n", "40", "--length", "4", "--t", &t, "--out", &format!("s{i}.wfld")]);
    }
    let line = &ok(d, &["verify", "residual", "--snapshots", "s0.wfld", "s1.wfld", "s2.wfld", "--dt", "0.02", "--tol", "1"])[0];
    assert!(line["rel_l2"].as_f64().unwrap() < 0.2);
}

#[test]
fn time_derivative_field_matches_fourier_velocity() {
    // ∂ₜ of a plus-subspace wavelet is -i c |k| times its spectrum.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = ["make-field", "--kind", "wavelet", "--wavelet", "kaiser", "--n", "32", "--length", "8"];
    ok(d, &[&common[..], &["--t", "0.4", "--out", "u.wfld"]].concat());
    ok(d, &[&common[..], &["--time-derivative", "--out", "ut.wfld"]].concat());
    ok(d, &[&common[..], &["--out", "u0.wfld"]].concat());
    // Evolving (u0, ∂ₜu0) with the Fourier oracle reproduces the sampled u at t = 0.4.
    ok(d, &["ivp", "--w", "u0.wfld", "--v", "ut.wfld", "--method", "fourier", "--t", "0.4", "--out", "evolved.wfld"]);
    let line = &ok(d, &["verify", "compare", "--a", "u.wfld", "--b", "evolved.wfld", "--tol", "5e-2"])[0];
    assert_eq!(line["pass"], Value::Bool(true));
}
