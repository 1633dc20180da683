mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::manifest_path;

fn dampwave(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dampwave"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn config(name: &str) -> String {
    manifest_path(&format!("configs/{name}")).to_str().unwrap().to_owned()
}

fn with_extra(dir: &Path, base: &str, extra: &str) -> String {
    let text = std::fs::read_to_string(config(base)).unwrap() + extra;
    let path = dir.join("case.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn shipped_configs_validate() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["linear.toml", "semilinear.toml", "low_mode.toml"] {
        let out = dampwave(dir.path(), &["validate", &config(name)]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn hypothesis_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let case = with_extra(
        dir.path(),
        "linear.toml",
        "\n[nonlinearity]\nf = { kind = \"quadratic\", coefficient = 1.0 }\ngrowth = { a0 = 1.0, b0 = 1.0 }\n",
    );
    let out = dampwave(dir.path(), &["validate", &case]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("growth"));
    assert_eq!(dampwave(dir.path(), &["simulate", &case]).status.code(), Some(2));
}

#[test]
fn malformed_config_and_bad_window_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let case = with_extra(dir.path(), "linear.toml", "\n[bogus]\nx = 1\n");
    assert_eq!(dampwave(dir.path(), &["validate", &case]).status.code(), Some(2));
    let out = dampwave(dir.path(), &["steer", &config("linear.toml"), "--alpha", "1e-2", "--delta", "0.7"]);
    assert_eq!(out.status.code(), Some(2));
    let out = dampwave(dir.path(), &["steer", &config("linear.toml"), "--alpha", "0", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overflow_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let case = with_extra(
        dir.path(),
        "linear.toml",
        "\n[memory]\nkernel = { kind = \"constant\", m0 = 1e300 }\ng = { kind = \"constant\", value = 1e300 }\n",
    );
    let out = dampwave(dir.path(), &["simulate", &case]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn sweep_report_is_deterministic_across_execution_modes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(dampwave(a.path(), &["sweep", &config("linear.toml")]).status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_dampwave"))
        .args(["--sequential", "--out"])
        .arg(b.path())
        .args(["sweep", &config("linear.toml")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let ra = std::fs::read(a.path().join("report.csv")).unwrap();
    let rb = std::fs::read(b.path().join("report.csv")).unwrap();
    assert_eq!(ra, rb);
    let text = String::from_utf8(ra).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("alpha,delta,final_error"));
    assert_eq!(lines.count(), 6);
    assert!(a.path().join("timings.csv").exists());
}

#[test]
fn steer_writes_report_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(dir.path(), &["steer", &config("linear.toml"), "--alpha", "1e-4", "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert!(report.lines().nth(1).unwrap().starts_with("1.0000000000000000e-4,1.0000000000000001e-1,"));
    let traj = std::fs::read_to_string(dir.path().join("trajectory_steered.csv")).unwrap();
    assert!(traj.starts_with("t,norm,w_1,w_2,w_3,w_4,v_1,v_2,v_3,v_4,event"));
    assert_eq!(traj.lines().count(), 1 + 101);
}

#[test]
fn simulate_marks_impulse_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(dir.path(), &["simulate", &config("semilinear.toml")]);
    assert_eq!(out.status.code(), Some(0));
    let traj = std::fs::read_to_string(dir.path().join("trajectory_base.csv")).unwrap();
    let events: Vec<&str> = traj.lines().filter_map(|l| l.rsplit(',').next()).filter(|e| !e.is_empty()).collect();
    assert_eq!(events, ["event", "pre", "post"]);
}

#[test]
fn gramian_spectrum_is_sorted_and_nonnegative() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampwave(dir.path(), &["gramian", &config("linear.toml"), "--delta", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("gramian_spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue"));
    let eigs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(eigs.len(), 8);
    assert!(eigs.windows(2).all(|w| w[0] <= w[1]));
    assert!(eigs[0] > 0.0);
}
