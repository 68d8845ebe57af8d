use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_riccati-kit"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args([cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(extra)
        .env_remove("RICCATI_KIT_THREADS")
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const DECAY: &str = r#"{"coefficients": {"family": "decay_scalar"}, "z0": [[[0, 0]]], "lambda": [[[-0.5, 0]]]}"#;

#[test]
fn principal_report_carries_the_extremal_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "decay.json", DECAY);
    let out = dir.path().join("out");
    let o = run("principal", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["command"], "principal");
    assert_eq!(r["verdict"], "extremal");
    let z = r["evidence"]["z_star_t1_integrated"][0][0][0].as_f64().unwrap();
    assert!((z + 1.0).abs() < 1e-6, "{z}");
    // the resolved configuration is embedded in full
    assert_eq!(r["config"]["horizon"], 20.0);
    assert_eq!(r["config"]["classify"]["plateau_tol"], 1e-3);
    assert_eq!(r["config"]["integrator"]["rel_tol"], 1e-10);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    let v: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!((v + 1.0).abs() < 1e-6);
}

#[test]
fn solve_writes_the_trajectory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "quad.json",
        r#"{"coefficients": {"constant": {"P": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}},
            "z0": [[[1, 0], [0, 0]], [[0, 0], [0.5, 0]]], "output": {"samples": 11}}"#,
    );
    let out = dir.path().join("out");
    let o = run("solve", &cfg, &out, &["--horizon", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,re_1_1,im_1_1,re_1_2,im_1_2,re_2_1,im_2_1,re_2_2,im_2_2");
    assert_eq!(lines.len(), 12);
    // Z = diag(1/(1+t), 0.5/(1+0.5t)) at t = 10
    let last: Vec<f64> = lines[11].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 10.0);
    assert!((last[1] - 1.0 / 11.0).abs() < 1e-8);
    assert!((last[7] - 0.5 / 6.0).abs() < 1e-8);
    assert_eq!(report(&out)["evidence"]["status"]["kind"], "regular_on");
}

#[test]
fn solve_reports_an_escape_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "neg.json",
        r#"{"coefficients": {"family": "pure_quadratic_constant"}, "z0": [[[-1, 0]]], "horizon": 5}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("solve", &cfg, &out, &[]).status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["verdict"], "blow_up");
    assert!((r["evidence"]["status"]["time"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // ν diverges for p ≡ 1
    let quad = write_config(dir.path(), "quad.json", r#"{"coefficients": {"family": "pure_quadratic_constant"}}"#);
    let out = dir.path().join("p");
    assert_eq!(run("principal", &quad, &out, &[]).status.code(), Some(3));
    assert_eq!(report(&out)["verdict"], "numerical_failure");
    // base escapes at t = 1 but the family needs it regular
    let neg = write_config(
        dir.path(),
        "neg.json",
        r#"{"coefficients": {"family": "pure_quadratic_constant"}, "z0": [[[-1, 0]]], "lambda": [[[2, 0]]]}"#,
    );
    assert_eq!(run("family", &neg, &dir.path().join("f"), &[]).status.code(), Some(3));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        r#"{"coefficients": {"family": "hill"}}"#,
        r#"{"coefficients": {"family": "decay_scalar"}, "z0": [[[0, 0], [0, 0]]]}"#,
        r#"{"coefficients": {"family": "decay_scalar"}, "bogus": true}"#,
        r#"not json"#,
    ];
    for (i, body) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), body);
        assert_eq!(run("solve", &cfg, &out, &[]).status.code(), Some(2), "{body}");
    }
    let cfg = write_config(dir.path(), "ok.json", DECAY);
    assert_eq!(run("solve", &dir.path().join("missing.json"), &out, &[]).status.code(), Some(2));
    assert_eq!(run("solve", &cfg, &out, &["--horizon", "-3"]).status.code(), Some(2));
    assert_eq!(run("family", &write_config(dir.path(), "nolam.json", r#"{"coefficients": {"family": "decay_scalar"}}"#), &out, &[]).status.code(), Some(2));
    assert_eq!(bin().args(["solve"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["frobnicate"]).output().unwrap().status.code(), Some(2));
    let o = bin()
        .args(["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("RICCATI_KIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_equation_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "decay.json",
        r#"{"coefficients": {"family": "decay_scalar"}, "horizon": 15, "sampling": {"draws": 30}}"#,
    );
    let mut reports = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("o{i}"));
        let o = bin()
            .args(["classify-equation", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(["--seed", "11"])
            .env("RICCATI_KIT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        reports.push((fs::read(out.join("report.json")).unwrap(), fs::read(out.join("samples.csv")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
    let r: Value = serde_json::from_slice(&reports[0].0).unwrap();
    assert_eq!(r["verdict"], "sub_extremal");
    assert_eq!(r["config"]["seed"], 11);
}

#[test]
fn system_diagnostics_writes_ratio_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sys.json",
        r#"{"horizon": 100, "coefficients": {"family": "pure_quadratic_constant"},
            "solutions": [{"phi": [[[1, 0]]], "psi": [[[2, 0]]]}, {"phi": [[[1, 0]]], "psi": [[[1, 0]]]}]}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("system-diagnostics", &cfg, &out, &[]).status.code(), Some(0));
    let csv = fs::read_to_string(out.join("ratio.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,ratio12,ratio21,running_sup,running_inf");
    let r = report(&out);
    assert_eq!(r["verdict"], "bounded_both_ways");
    assert_eq!(r["evidence"]["solutions"][0]["class"], "non_principal");
    assert_eq!(r["evidence"]["linearly_independent"], true);
}

#[test]
fn identities_hold_on_a_tabulated_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "table.json",
        r#"{"horizon": 4,
            "coefficients": {"table": {"grid": [0, 2, 4], "values": [
                {"P": [[[1, 0]]], "Q": [[[0.2, 0]]]},
                {"P": [[[0.5, 0.1]]], "Q": [[[0.1, 0]]], "S": [[[-0.1, 0]]]},
                {"P": [[[0.8, 0]]]}]}},
            "z0": [[[0.3, 0]]], "lambda": [[[0.4, -0.2]]]}"#,
    );
    let out = dir.path().join("out");
    let o = run("identities", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&out)["verdict"], "holds");
    let o = run("family", &cfg, &dir.path().join("fam"), &[]);
    assert_eq!(o.status.code(), Some(0));
    let dev = report(&dir.path().join("fam"))["evidence"]["max_deviation_vs_direct"].as_f64().unwrap();
    assert!(dev < 1e-6, "{dev}");
}
