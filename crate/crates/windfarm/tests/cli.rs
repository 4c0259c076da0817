//! End-to-end CLI smoke tests: subcommand plumbing, output files, and the
//! exit-code contract (0 success, 1 config error, 2 numerical failure).

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_windfarm"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).expect("write fixture");
}

#[test]
fn simulate_identify_analyze_compare_roundtrip() {
    let dir = tempfile::tempdir().expect("tempdir");
    let sim = dir.path().join("run.toml");
    write(
        &sim,
        "[sim]\ninflow = 13.0\nduration = 400.0\nmetrics_window = [300.0, 400.0]\n\
         [signal]\nkind = \"constant\"\nengage_time = 100.0\n",
    );
    let st = bin().arg("simulate").arg(&sim).status().expect("spawn");
    assert_eq!(st.code(), Some(0));
    assert!(dir.path().join("run_timeseries.csv").exists());
    assert!(dir.path().join("run_metrics.txt").exists());

    let ident = dir.path().join("ident.toml");
    write(&ident, "");
    let st = bin().arg("identify").arg(&ident).status().expect("spawn");
    assert_eq!(st.code(), Some(0));
    let model = dir.path().join("ident_model.txt");
    assert!(model.exists());

    let st = bin()
        .args(["analyze", model.to_str().unwrap(), "--sweep"])
        .status()
        .expect("spawn");
    assert_eq!(st.code(), Some(0));
    assert!(dir.path().join("ident_model_spectrum.txt").exists());
    assert!(dir.path().join("ident_model_spectrum.csv").exists());

    // compare the run against itself: same shape, zero deltas
    let metrics = dir.path().join("run_metrics.txt");
    let out = bin()
        .args([
            "compare",
            metrics.to_str().unwrap(),
            metrics.to_str().unwrap(),
        ])
        .output()
        .expect("spawn");
    assert_eq!(out.status.code(), Some(0));
    assert!(!out.stdout.is_empty());
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().expect("tempdir");
    // missing file
    let st = bin()
        .arg("simulate")
        .arg(dir.path().join("nope.toml"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
    // invalid setting case
    let bad = dir.path().join("bad.toml");
    write(&bad, "[controller]\nsetting_case = 3\n");
    let st = bin().arg("simulate").arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(1));
    // unknown key
    let unk = dir.path().join("unk.toml");
    write(&unk, "[sim]\nwindspeed = 13.0\n");
    let st = bin().arg("simulate").arg(&unk).status().unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn numerical_failures_exit_2() {
    let dir = tempfile::tempdir().expect("tempdir");
    // demand above available power: the experiment saturates and is invalid
    let ident = dir.path().join("sat.toml");
    write(
        &ident,
        "[identify]\nbaseline_power = 4.5e6\nstep_size = 1.0e6\n",
    );
    let st = bin().arg("identify").arg(&ident).status().unwrap();
    assert_eq!(st.code(), Some(2));
}
