use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn clickwit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clickwit"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = clickwit(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

#[test]
fn single_ideal_emitter_prediction() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        dir.path(),
        &["predict", "--ions", "1", "--eta", "1.0", "--split", "0.5"],
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(num(&v, "d"), 0.5);
    assert_eq!(json(&dir.path().join("prediction.json")), v);
    let manifest = json(&dir.path().join("predict.manifest.json"));
    assert_eq!(manifest["command"], "predict");
    assert_eq!(manifest["artifacts"][0], "prediction.json");
}

#[test]
fn coherent_light_analyzes_to_zero() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "simulate",
            "classical",
            "--kind",
            "coherent",
            "--mu",
            "0.02",
            "--bins",
            "1e7",
            "--seed",
            "11",
        ],
    );
    let tags = d.join("tags.iontag");
    ok(d, &["analyze", tags.to_str().unwrap()]);
    let report = json(&d.join("report.json"));
    let (dv, sigma) = (num(&report, "d"), num(&report, "sigma_d"));
    assert!(dv.abs() <= 4.0 * sigma, "d = {dv}, sigma = {sigma}");
    assert_eq!(report["n_bins"], 10_000_000);
    assert_eq!(report["chunks"]["d_values"].as_array().unwrap().len(), 5);

    // The counts file gives the same totals.
    ok(
        d,
        &[
            "analyze",
            d.join("counts.json").to_str().unwrap(),
            "--output",
            "from_counts.json",
        ],
    );
    assert_eq!(num(&json(&d.join("from_counts.json")), "d"), dv);
}

#[test]
fn analysis_of_simulated_crystal_agrees_with_prediction() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["crystal", "--ions", "55", "--seed", "4"]);
    let layout = d.join("crystal.csv");
    let layout = layout.to_str().unwrap();
    let optics = ["--eta0", "0.05", "--eta-p", "0.71"];
    let mut sim = vec![
        "simulate", "pulsed", "--layout", layout, "--pulses", "2e6", "--seed", "2", "--tags", "p.iontag",
    ];
    sim.extend(optics);
    ok(d, &sim);
    let tags = d.join("p.iontag");
    ok(
        d,
        &[
            "analyze",
            tags.to_str().unwrap(),
            "--gate-open-ps",
            "400000",
            "--gate-close-ps",
            "600000",
            "--trim-ps",
            "1000",
        ],
    );
    let mut pred = vec!["predict", "--layout", layout];
    pred.extend(optics);
    ok(d, &pred);
    let report = json(&d.join("report.json"));
    let expected = num(&json(&d.join("prediction.json")), "d");
    let (dv, sigma) = (num(&report, "d"), num(&report, "sigma_d"));
    assert!(
        (dv - expected).abs() <= 4.0 * sigma,
        "{dv} vs {expected} (sigma {sigma})"
    );
    assert!(expected > 0.0);
}

#[test]
fn single_emitter_stream_agrees_with_prediction() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "simulate", "pulsed", "--ions", "1", "--eta0", "1", "--eta-p", "1", "--pulses", "1e5", "--seed", "3",
            "--tags", "t.iontag",
        ],
    );
    let counts = json(&d.join("counts.json"));
    assert_eq!(counts["n_c"], 0);
    ok(d, &["analyze", d.join("t.iontag").to_str().unwrap()]);
    let report = json(&d.join("report.json"));
    // p00 = 0 here, so the spread of the chunks is the error bar.
    let sigma = num(&report["chunks"], "sigma_of_mean");
    assert!(report["sigma_d"].is_null());
    assert!((num(&report, "d") - 0.5).abs() <= 4.0 * sigma.max(1e-12));
}

fn assert_replay_identical(args: &[&str], manifest: &str) {
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    ok(first.path(), args);
    let manifest_path = first.path().join(manifest);
    ok(second.path(), &["replay", manifest_path.to_str().unwrap()]);
    let m = json(&manifest_path);
    let mut names: Vec<String> = m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a.as_str().unwrap().to_owned())
        .collect();
    names.push(manifest.to_owned());
    for name in names {
        let a = fs::read(first.path().join(&name)).unwrap();
        let b = fs::read(second.path().join(&name)).unwrap();
        assert!(a == b, "{name} differs after replay of {args:?}");
    }
}

#[test]
fn replay_reproduces_outputs_byte_for_byte() {
    assert_replay_identical(&["crystal", "--ions", "204", "--seed", "9"], "crystal.manifest.json");
    assert_replay_identical(
        &[
            "simulate", "pulsed", "--ions", "125", "--eta0", "0.01", "--pulses", "300000", "--seed", "5", "--tags",
            "p.iontag",
        ],
        "simulate-pulsed.manifest.json",
    );
    assert_replay_identical(
        &[
            "simulate",
            "continuous",
            "--ions",
            "12",
            "--model",
            "apd",
            "--target-rate",
            "2000",
            "--duration",
            "0.2",
            "--seed",
            "6",
        ],
        "simulate-continuous.manifest.json",
    );
    assert_replay_identical(
        &[
            "simulate",
            "classical",
            "--kind",
            "thermal",
            "--mu",
            "0.5",
            "--bins",
            "200000",
            "--seed",
            "7",
        ],
        "simulate-classical.manifest.json",
    );
    assert_replay_identical(
        &["sweep", "--ions", "1,12,3000", "--seeds", "3", "--seed", "1"],
        "sweep.manifest.json",
    );
    assert_replay_identical(
        &["predict", "--ions", "55", "--seed", "2", "--runs-for", "2sigma"],
        "predict.manifest.json",
    );
}

#[test]
fn generated_seed_is_recorded_and_replayable() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "simulate",
            "classical",
            "--kind",
            "coherent",
            "--mu",
            "0.1",
            "--bins",
            "1000",
            "--no-tags",
        ],
    );
    let m = json(&dir.path().join("simulate-classical.manifest.json"));
    let seed = m["seed"].as_u64().expect("seed recorded");
    assert_eq!(m["parameters"]["seed"].as_u64(), Some(seed));
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 1);

    let again = TempDir::new().unwrap();
    let path = dir.path().join("simulate-classical.manifest.json");
    ok(again.path(), &["replay", path.to_str().unwrap()]);
    assert_eq!(
        fs::read(dir.path().join("counts.json")).unwrap(),
        fs::read(again.path().join("counts.json")).unwrap()
    );
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_clickwit"))
        .args(["predict", "--ions", "3", "--eta", "0.2"])
        .env("CLICKWIT_OUT_DIR", dir.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(dir.path().join("prediction.json").exists());
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for args in [
        &["predict", "--no-such-flag"][..],
        &["predict", "--ions", "2", "--eta", "1.5"],
        &[
            "simulate",
            "classical",
            "--kind",
            "coherent",
            "--mu",
            "0.1",
            "--bins",
            "1.5",
        ],
        &["simulate", "pulsed", "--ions", "5", "--split", "2", "--seed", "1"],
        &["sweep", "--ions", "0,12"],
    ] {
        assert_eq!(clickwit(d, args).status.code(), Some(2), "{args:?}");
    }
    ok(
        d,
        &[
            "simulate",
            "continuous",
            "--ions",
            "3",
            "--rate-per-ion",
            "1e5",
            "--duration",
            "0.01",
            "--seed",
            "1",
        ],
    );
    let tags = d.join("tags.iontag");
    assert_eq!(
        clickwit(d, &["analyze", tags.to_str().unwrap()]).status.code(),
        Some(2),
        "missing --tau-ps"
    );
}

#[test]
fn infeasible_requests_exit_with_3() {
    let dir = TempDir::new().unwrap();
    let out = clickwit(
        dir.path(),
        &["predict", "--ions", "4", "--eta", "0", "--runs-for", "2sigma"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not positive"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.iontag");
    assert_eq!(
        clickwit(dir.path(), &["analyze", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sweep_rises_then_flattens() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "sweep",
            "--ions",
            "1,12,55,125,204,275",
            "--eta0",
            "6.1e-4",
            "--sigma-r",
            "2.3",
            "--sigma-a",
            "98",
            "--eta-p",
            "0.71",
            "--seed",
            "0",
        ],
    );
    let mut reader = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec!["n", "d", "sigma_d", "n_required_2sigma"]
    );
    let rows: Vec<(usize, f64, f64)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap())
        })
        .collect();
    let ns: Vec<usize> = rows.iter().map(|r| r.0).collect();
    assert_eq!(ns, [1, 12, 55, 125, 204, 275]);
    let d: Vec<f64> = rows.iter().map(|r| r.1).collect();
    assert!(rows.iter().all(|r| r.1 > 0.0 && r.2 > 0.0));
    assert!(d[0] < d[1] && d[1] < d[2], "{d:?}");
    // Five times the ions from 55 to 275 gives far less than five times d.
    assert!(d[5] / d[2] < 2.5, "{d:?}");
}
