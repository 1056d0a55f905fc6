use std::process::Command;

fn cvgpr() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cvgpr"));
    cmd.env_remove(cvgpr::experiment::OUT_DIR_ENV).env("RUST_LOG", "warn");
    cmd
}

#[test]
fn run_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cvgpr()
        .args(["run", "--n", "1", "--x-star", "0.3", "--xi", "0.05", "--seed", "3"])
        .env(cvgpr::experiment::OUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["quantum"]["relError"].as_f64().unwrap() < 0.05);
    assert_eq!(report["seed"], 3);
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn invalid_input_exits_two_with_error_field() {
    let out = cvgpr().args(["run", "--xi", "-0.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "input");
    assert!(out.stdout.is_empty());
}

#[test]
fn singular_system_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dup.csv");
    std::fs::write(&csv, "x1,y\n0.0,1.0\n0.0,1.0\n").unwrap();
    let out = cvgpr().args(["classical", "--dataset", csv.to_str().unwrap(), "--noise", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let ini = dir.path().join("exp.ini");
    std::fs::write(&ini, "[data]\nn = 2\n\n[pipeline]\nxi = 7\nvariance = false\n").unwrap();
    let out = cvgpr().args(["run", "--config", ini.to_str().unwrap(), "--xi", "0.1"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["params"]["xi"], 0.1);
    assert!(report["quantum"]["variance"].is_null());
}

#[test]
fn gen_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let out = cvgpr().args(["gen", "--n", "3", "--d", "2", "--seed", "9", "--out", csv.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let data = cvgpr::experiment::load_dataset(&csv).unwrap();
    assert_eq!((data.len(), data.dim()), (3, 2));

    let out = cvgpr()
        .args(["sweep", "--axis", "xi", "--values", "0.05,0.1", "--dataset", csv.to_str().unwrap(), "--x-star", "0,0"])
        .args(["--output", dir.path().to_str().unwrap(), "--variance", "false"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}
