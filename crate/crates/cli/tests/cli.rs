//! End-to-end checks of the `visco` binary: exit codes, artifact layout,
//! determinism, and the oracle fault hook.

use std::path::Path;
use std::process::{Command, Output};

fn visco(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visco"))
        .args(args)
        .current_dir(dir)
        .env_remove("VISCO_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_RUN: &str = r#"
model = "incompressible"
t_final = 0.2
sample_interval = 0.05

[grid]
n = 16

[scheme]
dt = 0.02

[initial]
u_kind = "noise"
u_amplitude = 0.02
seed = 7
"#;

#[test]
fn run_writes_complete_artifact_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL_RUN);
    let out = visco(&["run", "--config", &cfg, "--out-dir", "a"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.toml", "series.csv", "series.svg", "summary.json", "manifest.json"] {
        assert!(tmp.path().join("a").join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("a/manifest.json")).unwrap())
            .unwrap();
    // crash-consistency: every file the manifest lists exists
    for f in manifest["files"].as_array().unwrap() {
        assert!(tmp.path().join("a").join(f.as_str().unwrap()).exists());
    }
    let csv = std::fs::read_to_string(tmp.path().join("a/series.csv")).unwrap();
    assert!(csv.starts_with("t,dt,u_h2"));
    assert!(csv.lines().count() >= 5);
}

#[test]
fn identical_config_and_seed_give_bit_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL_RUN);
    let out1 = visco(&["run", "--config", &cfg, "--out-dir", "r1"], tmp.path());
    let out2 = visco(&["run", "--config", &cfg, "--out-dir", "r2"], tmp.path());
    assert!(out1.status.success() && out2.status.success());
    let a = std::fs::read(tmp.path().join("r1/series.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("r2/series.csv")).unwrap();
    assert_eq!(a, b);
    // a different seed must change the data
    let out3 = visco(
        &["run", "--config", &cfg, "--out-dir", "r3", "--seed", "8"],
        tmp.path(),
    );
    assert!(out3.status.success());
    let c = std::fs::read(tmp.path().join("r3/series.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn rest_state_yields_zero_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "rest.toml",
        r#"
t_final = 0.1
sample_interval = 0.05
[initial]
u_kind = "zero"
"#,
    );
    let out = visco(&["run", "--config", &cfg, "--out-dir", "rest"], tmp.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(tmp.path().join("rest/series.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let energy: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
        assert_eq!(energy, 0.0);
    }
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "t_final = -1.0\n");
    let out = visco(&["run", "--config", &bad], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let missing = visco(&["run", "--config", "nope.toml"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
    let unknown_key = write_config(tmp.path(), "unk.toml", "t_final = 1.0\nbogus = 3\n");
    let out = visco(&["run", "--config", &unknown_key], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn violent_data_reports_solver_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    // huge displacement amplitude at tiny kappa: the map folds or the step
    // is rejected; either way a distinct nonzero code, never a panic
    let cfg = write_config(
        tmp.path(),
        "violent.toml",
        r#"
t_final = 2.0
sample_interval = 0.5
[params]
kappa = 1e-4
[scheme]
dt = 0.2
[initial]
eta_kind = "composed-shears"
eta_amplitude = 0.45
u_kind = "noise"
u_amplitude = 12.0
seed = 3
"#,
    );
    let out = visco(&["run", "--config", &cfg, "--out-dir", "v"], tmp.path());
    let code = out.status.code().expect("no signal");
    assert!(
        [3, 4, 5].contains(&code),
        "expected solver failure code, got {code}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn oracle_passes_and_fault_injection_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = visco(&["oracle", "--out-dir", "o1", "--grid", "8"], tmp.path());
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o1/oracle.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], true);

    let bad = visco(
        &["oracle", "--out-dir", "o2", "--grid", "8", "--inject-fault"],
        tmp.path(),
    );
    assert_eq!(bad.status.code(), Some(6));
}

#[test]
fn sweep_parallel_matches_serial_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
t_final = 0.2
sample_interval = 0.1
[grid]
n = 16
[scheme]
dt = 0.02
[initial]
u_kind = "noise"
u_amplitude = 0.02
seed = 5
[sweep]
kappas = [2.0, 4.0]
"#;
    let cfg = write_config(tmp.path(), "sweep.toml", body);
    let serial = visco(
        &["sweep", "--config", &cfg, "--out-dir", "s", "--parallel", "false"],
        tmp.path(),
    );
    assert!(serial.status.success(), "{}", String::from_utf8_lossy(&serial.stderr));
    let par = Command::new(env!("CARGO_BIN_EXE_visco"))
        .args(["sweep", "--config", &cfg, "--out-dir", "p", "--parallel", "true"])
        .current_dir(tmp.path())
        .env("VISCO_THREADS", "2")
        .output()
        .unwrap();
    assert!(par.status.success(), "{}", String::from_utf8_lossy(&par.stderr));
    for f in ["sweep.csv", "series_0.csv", "series_1.csv"] {
        let a = std::fs::read(tmp.path().join("s").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("p").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between serial and parallel");
    }
    // two identical kappa entries produce identical rows
    let twin_cfg = write_config(
        tmp.path(),
        "twin.toml",
        &body.replace("kappas = [2.0, 4.0]", "kappas = [2.0, 2.0]"),
    );
    let twin = visco(&["sweep", "--config", &twin_cfg, "--out-dir", "t"], tmp.path());
    assert!(twin.status.success());
    let a = std::fs::read(tmp.path().join("t/series_0.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("t/series_1.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn compare_linear_small_data_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "cl.toml",
        r#"
t_final = 0.2
sample_interval = 0.05
[grid]
n = 16
[scheme]
dt = 0.005
[initial]
u_kind = "noise"
u_amplitude = 0.001
seed = 11
"#,
    );
    let out = visco(&["compare-linear", "--config", &cfg, "--out-dir", "cl"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("cl/summary.json")).unwrap())
            .unwrap();
    // ε-amplitude data: the combined deviation stays O(ε²)
    let sup = summary["deviation_sup"].as_f64().unwrap();
    assert!(sup > 0.0 && sup < 1e-4, "deviation_sup {sup}");
    assert!(tmp.path().join("cl/deviation.csv").exists());

    let rep = visco(&["report", "--out-dir", "cl"], tmp.path());
    assert!(rep.status.success());
    let text = String::from_utf8_lossy(&rep.stdout);
    assert!(text.contains("config hash") && text.contains("deviation_sup"));
    // report on a missing directory is a config error
    let missing = visco(&["report", "--out-dir", "nowhere"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn compressible_run_and_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "comp.toml",
        r#"
model = "compressible"
t_final = 0.5
sample_interval = 0.1
[grid]
n = 16
[scheme]
dt = 0.01
[initial]
u_kind = "noise"
u_amplitude = 0.02
seed = 13
"#,
    );
    let out = visco(
        &["run", "--config", &cfg, "--out-dir", "c", "--t-final", "0.2", "--kappa", "3.0"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = std::fs::read_to_string(tmp.path().join("c/config.toml")).unwrap();
    assert!(written.contains("t_final = 0.2"), "t-final override not applied");
    assert!(written.contains("kappa = 3.0"), "kappa override not applied");
    let csv = std::fs::read_to_string(tmp.path().join("c/series.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    // compressible energy decays along the flow
    let first: f64 = rows.first().unwrap().split(',').nth(4).unwrap().parse().unwrap();
    let last: f64 = rows.last().unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!(last < first);
}
