//! End-to-end checks of the `parisian` binary: exit codes, output layout,
//! flag overrides, and worker-count determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parisian"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn csv(dir: &Path) -> String {
    std::fs::read_to_string(dir.join("table.csv")).unwrap()
}

#[test]
fn asympt_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{"regime":"cor34_iii","alpha":2.0,"c":1.0,"s":1.0,"u":3.0,"t":0.0}"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "asympt",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let table = csv(&out_dir);
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "u,p_mc,stderr,p_asympt,ratio,p_exact_if_available"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    // alpha = 2, S = 1, c = 1, u = 3 degenerates to the Gaussian tail at u + cS.
    let expected = parisian_core::gauss::psi(4.0);
    let got: f64 = row[3].parse().unwrap();
    assert!(((got - expected) / expected).abs() < 1e-14, "{got} vs {expected}");

    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(record["format_version"], 1);
    assert_eq!(record["command"], "asympt");
    assert_eq!(record["results"][0]["regime"], "cor34_iii");
}

#[test]
fn unknown_regime_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), r#"{"regime":"thm99","u":1.0}"#);
    let out = run(&["asympt", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thm99"));
}

#[test]
fn malformed_config_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "{not valid json");
    for missing in [false, true] {
        let path = if missing {
            tmp.path().join("nope.json")
        } else {
            config.clone()
        };
        let out = run(&["asympt", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(3), "missing={missing}");
    }
    // Well-formed JSON with the wrong shape is still a config error.
    let config = write_config(tmp.path(), r#"{"regime":"thm21","c":"a string"}"#);
    let out = run(&["asympt", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{"regime":"cor34_iii","alpha":2.0,"c":1.0,"s":1.0,"u":3.0,"t":0.0}"#,
    );
    // A path whose parent is a regular file cannot be created, even as root.
    let block = tmp.path().join("blocker");
    std::fs::write(&block, "x").unwrap();
    let out = run(&[
        "asympt",
        "--config",
        config.to_str().unwrap(),
        "--out",
        block.join("sub").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn env_var_sets_default_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{"regime":"cor34_iii","alpha":2.0,"c":1.0,"s":1.0,"u":3.0,"t":0.0}"#,
    );
    let out_dir = tmp.path().join("from-env");
    let out = bin()
        .args(["asympt", "--config", config.to_str().unwrap()])
        .env("PARISIAN_OUT_DIR", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(out_dir.join("run.json").exists());
    assert!(out_dir.join("table.csv").exists());
}

const SIM_CONFIG: &str = r#"{
  "model": {"kind": "bm"}, "c": 1.0, "s": 1.0, "u": 2.0,
  "window": {"kind": "constant", "t": 0.1},
  "mc": {"n_paths": 20000, "grid_step": 0.0078125, "seed": 5,
         "importance_sampling": false, "batch_size": 1024}
}"#;

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SIM_CONFIG);
    let mut tables = Vec::new();
    for workers in ["1", "2", "4"] {
        let out_dir = tmp.path().join(format!("w{workers}"));
        let out = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--workers",
            workers,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "workers={workers}: {out:?}");
        tables.push(csv(&out_dir));
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0], tables[2]);
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SIM_CONFIG);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "99",
        "--n-paths",
        "5000",
        "--grid-step",
        "0.015625",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    let mc = &record["config"]["mc"];
    assert_eq!(mc["seed"], 99);
    assert_eq!(mc["n_paths"], 5000);
    assert_eq!(mc["grid_step"], 0.015625);
}

#[test]
fn compare_tabulates_monotone_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{"regime":"thm21","us":[3,4,5,6,7,8],"c":1.0,"t1":1.0,"t2":2.0}"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "compare",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let table = csv(&out_dir);
    let mut ratios = Vec::new();
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6);
        let asympt: f64 = cols[3].parse().unwrap();
        let exact: f64 = cols[5].parse().unwrap();
        ratios.push(asympt / exact);
    }
    assert_eq!(ratios.len(), 6);
    // The ratio column drifts monotonically and lands near 1.
    let increasing = ratios.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = ratios.windows(2).all(|w| w[1] <= w[0]);
    assert!(increasing || decreasing, "{ratios:?}");
    assert!((ratios.last().unwrap() - 1.0).abs() < 0.15, "{ratios:?}");
}
