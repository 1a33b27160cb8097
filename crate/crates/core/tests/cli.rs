use std::path::Path;
use std::process::Command;

use thermorod::scenario::{parse_config, Quantity};

fn thermorod(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_thermorod")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn presets_are_listed_with_long_running_tags() {
    let (code, out, _) = thermorod(&["presets", "list"]);
    assert_eq!(code, 0);
    for name in ["arch-90", "cantilever-morph", "stent-straight-quarter", "stent-curved-half"] {
        assert!(out.contains(name), "{out}");
    }
    assert!(out.lines().any(|l| l.starts_with("stent-curved-half [long-running]")));
    assert!(out.lines().any(|l| l.starts_with("arch-90:")));
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(thermorod(&["check", "--config", "arch-90"]).0, 0);
    assert_eq!(thermorod(&["check", "--config", "no-such-file.toml"]).0, 2);

    let mut cfg = parse_config("arch-90").unwrap();
    cfg.discretization.h = Quantity::Si(-1.0);
    let bad = write_config(dir.path(), "bad.toml", &cfg.to_toml());
    let (code, _, err) = thermorod(&["check", "--config", &bad]);
    assert_eq!(code, 2, "{err}");

    let junk = write_config(dir.path(), "junk.toml", "schema_version = 1\nfoo = 3\n");
    assert_eq!(thermorod(&["check", "--config", &junk]).0, 2);
    assert_eq!(thermorod(&["run", "--config", "arch-90", "--h", "0"]).0, 2);
}

#[test]
fn run_writes_probes_snapshots_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config("cantilever-morph").unwrap();
    cfg.discretization.total_time = Quantity::Si(0.2);
    let path = write_config(dir.path(), "short.toml", &cfg.to_toml());
    let out = dir.path().join("out");
    let (code, _, err) = thermorod(&[
        "run",
        "--config",
        &path,
        "--h",
        "0.05",
        "--out",
        out.to_str().unwrap(),
        "--snapshot-times",
        "0.1",
    ]);
    assert_eq!(code, 0, "{err}");
    let probes = std::fs::read_to_string(out.join("probes.csv")).unwrap();
    assert_eq!(probes.lines().count(), 1 + 5);
    assert!(probes.starts_with("time,temperature,load_factor,iterations,substeps,tip_u1,tip_u2,tip_u3"));
    let snap = std::fs::read_to_string(out.join("snapshot_t0.1000.csv")).unwrap();
    assert!(snap.starts_with("patch_id,sample_index,u,x1,x2,x3"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["status"], "ok");
    assert_eq!(meta["schema_version"], 1);
}

#[test]
fn solver_failure_exits_with_3_and_dumps_last_state() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config("cantilever-morph").unwrap();
    cfg.discretization.total_time = Quantity::Si(0.5);
    cfg.solver.max_iter = Some(1);
    cfg.solver.max_halvings = Some(0);
    cfg.solver.max_continuation_stages = Some(0);
    let path = write_config(dir.path(), "fragile.toml", &cfg.to_toml());
    let out = dir.path().join("out");
    let (code, _, err) = thermorod(&["run", "--config", &path, "--h", "0.25", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{err}");
    assert!(out.join("last_good.csv").exists());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["status"], "solver-failure");
}

#[test]
fn convergence_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config("arch-90").unwrap();
    let conv = cfg.convergence.as_mut().unwrap();
    conv.reference_degree = 6;
    conv.reference_control_points = 24;
    conv.time = Quantity::Si(0.5);
    let path = write_config(dir.path(), "arch.toml", &cfg.to_toml());
    let out = dir.path().join("conv");
    let (code, stdout, err) = thermorod(&[
        "convergence",
        "--config",
        &path,
        "--h",
        "0.25",
        "--p",
        "4",
        "--n",
        "8,12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv, stdout);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "p,n,err_l2,rate");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("4,8,") && lines[2].starts_with("4,12,"));
}
