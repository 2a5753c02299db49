use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isacbench"))
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

#[test]
fn simulate_writes_csv_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--config", &config("ber.toml"), "--out"])
        .arg(dir.path())
        .arg("simulate")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.starts_with(isacbench::CSV_HEADER));
    assert!(dir.path().join("records.jsonl").exists());

    let again = bin()
        .args(["--config", &config("ber.toml"), "--out"])
        .arg(dir.path())
        .args(["--format", "summary", "metrics"])
        .output()
        .unwrap();
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "schema_version = 1\ntrials = 0\nmaster_seed = 1\n").unwrap();
    let out = bin().arg("--config").arg(&p).arg("simulate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_records_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--config", &config("ber.toml"), "metrics", "--records"])
        .arg(dir.path().join("none.jsonl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
