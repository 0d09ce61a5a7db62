use std::path::Path;
use std::process::Command;

fn memlab(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_memlab")).args(args).current_dir(cwd).env_remove("MEMLAB_WORKERS").output().unwrap()
}

#[test]
fn list_prints_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = memlab(&["list"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 10);
}

#[test]
fn run_writes_artifacts_to_default_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "experiment = \"loss-check\"\n").unwrap();
    let out = memlab(&["run", "c.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out/loss-check/results.csv")).unwrap();
    assert!(csv.starts_with("quantity,index,value,error\r\nloss,0,1.66666666666666"));
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "experiment = \"flow\"\n[numeric]\ntau_mx = 3.0\n").unwrap();
    let out = memlab(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("tau_mx"), "{err}");

    std::fs::write(dir.path().join("empty.toml"), "experiment = \"plateau-2d\"\n[sweep]\ndelta = []\n").unwrap();
    let out = memlab(&["run", "empty.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("sweep.delta: axis is empty"));
}

#[test]
fn all_cells_failing_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // a rate decay far too slow for the construction: every cell errors
    std::fs::write(
        dir.path().join("c.toml"),
        "experiment = \"rate-sweep\"\n[kernel]\nkind = \"expsum\"\ncoeffs = [1.0]\nrates = [0.01]\n[sweep]\nbeta = [40.0]\nm = [4]\n",
    )
    .unwrap();
    let out = memlab(&["run", "c.toml", "--out", "o", "--workers", "2"], dir.path());
    let summary = std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap();
    assert_eq!(out.status.code(), Some(1), "{summary}");
    assert!(summary.contains("\"failed\": 1"));
}
