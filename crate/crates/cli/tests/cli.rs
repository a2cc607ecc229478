use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn qhide(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qhide")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qhide-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    lines.next().expect("header");
    lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn qg_of_bell_example_is_three_quarters() {
    let v = json_stdout(&qhide(&["qg", "--ensemble", "bell-example1", "--gap-tol", "1e-9"]));
    let value = v["report"]["value"].as_f64().unwrap();
    assert!((value - 0.75).abs() < 1e-8, "{value}");
    assert_eq!(v["report"]["converged"], Value::Bool(true));
    assert_eq!(v["manifest"]["subcommand"], "qg");
}

#[test]
fn werner_curve_first_row_matches_single_copy_bound() {
    let out = qhide(&["fig3", "--params", "2,3,6", "--lmax", "4"]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 4);
    // At L = 1 the coarse bound collapses to 2q − 1/n with q = η_0.
    let eta0 = 1764.0 / 4284.0;
    assert!((rows[0][2] - (2.0 * eta0 - 1.0 / 3.0)).abs() < 1e-12);
    for w in rows.windows(2) {
        assert!(w[1][2] <= w[0][2]);
    }
    assert!(rows.iter().flatten().all(|x| x.is_finite()));
    // Manifest goes to stderr when the CSV goes to stdout.
    let manifest: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(manifest["subcommand"], "fig3");
}

#[test]
fn malformed_ensemble_exits_with_input_error() {
    let path = scratch("malformed.json");
    std::fs::write(&path, "{\"items\": [").unwrap();
    let out = qhide(&["validate", "--ensemble", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn invalid_ensemble_fails_validation() {
    // Probabilities sum to 0.9.
    let path = scratch("subnormalized.json");
    let ex = json_stdout(&qhide(&["example1", "--sigma", "bell"]));
    let mut ensemble = ex["ensemble"].clone();
    let first = ensemble["items"][0]["eta"].as_f64().unwrap();
    ensemble["items"][0]["eta"] = Value::from(first - 0.1);
    std::fs::write(&path, ensemble.to_string()).unwrap();
    let out = qhide(&["validate", "--ensemble", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_arguments_exit_with_input_error() {
    assert_eq!(qhide(&["fig3", "--params", "2,9,6"]).status.code(), Some(2));
    assert_eq!(
        qhide(&["hide-sim", "--ensemble", "bell-example1", "--strategy", "povm-file"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qhide(&["example2", "--m", "2", "--n", "3", "--d", "6", "--explicit", "--cap", "100"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn non_convergence_exits_three() {
    let out = qhide(&["qg", "--ensemble", "example2:1,2,3", "--max-iters", "1", "--gap-tol", "1e-15"]);
    // The commuting fast path may certify in one step; only a reported miss must map to 3.
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let converged = v["report"]["converged"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if converged { 0 } else { 3 }));
}

#[test]
fn hide_sim_csv_is_byte_deterministic_and_matches_reference() {
    let a = scratch("sim_a.csv");
    let b = scratch("sim_b.csv");
    for path in [&a, &b] {
        let out = qhide(&[
            "hide-sim",
            "--ensemble",
            "bell-example1",
            "--L",
            "4",
            "--trials",
            "20000",
            "--seed",
            "7",
            "--csv",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text_a = std::fs::read(&a).unwrap();
    assert_eq!(text_a, std::fs::read(&b).unwrap());
    let mut sidecar = a.clone().into_os_string();
    sidecar.push(".manifest.json");
    let manifest: Value = serde_json::from_slice(&std::fs::read(sidecar).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);

    let rows = csv_rows(std::str::from_utf8(&text_a).unwrap());
    assert_eq!(rows.len(), 4);
    for (l, row) in rows.iter().enumerate() {
        let exact = 0.5 + 0.5 * 0.5f64.powi(l as i32 + 1);
        assert!(row.iter().all(|x| x.is_finite()));
        assert!((row[3] - exact).abs() < 1e-12);
        assert!((row[1] - exact).abs() < 4.0 * row[2] + 1e-12);
    }
}

#[test]
fn hide_sim_json_reports_bound_and_hiding_verdict() {
    let v = json_stdout(&qhide(&["hide-sim", "--ensemble", "bell-example1", "--L", "2", "--trials", "5000"]));
    assert_eq!(v["hiding_condition"]["verdict"], "passes");
    let bound = v["locc_bound"]["value"].as_f64().unwrap();
    let exact = v["result"]["analytic_reference"].as_f64().unwrap();
    assert!(exact <= bound + 1e-9);
    assert_eq!(v["manifest"]["seed"], 0);
}

#[test]
fn global_orthogonal_strategy_always_wins() {
    let v = json_stdout(&qhide(&[
        "hide-sim",
        "--ensemble",
        "bell-example1",
        "--L",
        "3",
        "--trials",
        "2000",
        "--strategy",
        "global-orthogonal",
    ]));
    assert_eq!(v["result"]["empirical_success"].as_f64().unwrap(), 1.0);
}

#[test]
fn bounds_uniform_curve_for_bell_example() {
    let out = qhide(&["bounds", "--ensemble", "bell-example1", "--lmax", "6", "--which", "uniform"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 6);
    // n = 2 makes the uniform prefactor 1, so the bound is ½ + ½^L up to the solver gap.
    for (l, row) in rows.iter().enumerate() {
        assert!((row[1] - 0.5).abs() < 1e-12);
        assert!((row[2] - (0.5 + 0.5f64.powi(l as i32 + 1))).abs() < 1e-5);
    }
}

#[test]
fn example1_from_random_npt_state() {
    let v = json_stdout(&qhide(&["example1", "--sigma", "random-npt:3x3:11"]));
    let reference = &v["reference"];
    assert_eq!(reference["orthogonal"], Value::Bool(true));
    let qg = reference["qg"].as_f64().unwrap();
    assert!(qg > 0.5 && qg < 1.0);
}
