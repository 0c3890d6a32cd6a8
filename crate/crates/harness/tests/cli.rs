use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ngo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ngo")).args(args).output().expect("spawn ngo")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn convergence_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ngo(&["convergence", "--epsilon", "1,0.01", "--nts", "20,40", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("convergence_scalar.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,n_ts,dt,dx,linf_error,wall_seconds,solver_id"));
    assert_eq!(lines.count(), 4);
    let meta = fs::read_to_string(dir.path().join("convergence_scalar.meta")).unwrap();
    assert!(meta.contains("preset = scalar_smooth"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kind = \"scalar\"\nepsilons = [0.1]\nnot_a_key = 3\n");
    let o = ngo(&["scalar", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not_a_key"));
}

#[test]
fn bad_values_are_config_errors() {
    assert_eq!(ngo(&["scalar", "--epsilon", "-1"]).status.code(), Some(2));
    assert_eq!(ngo(&["scalar", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(ngo(&["system", "--preset", "hopping"]).status.code(), Some(2));
}

#[test]
fn unresolved_reference_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "kind = \"scalar\"\nepsilons = [0.001]\nn_ts = [20]\n\n[reference]\nsolver = \"spectral_rk4\"\nn_d = 64\n",
    );
    let o = ngo(&["convergence", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("convergence_scalar.csv").exists());
}

#[test]
fn system_solution_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = ngo(&["system", "--epsilon", "0.1", "--nts", "16", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("system_solution.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
}
