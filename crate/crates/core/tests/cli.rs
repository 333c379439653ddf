use std::fs;
use std::process::Command;

use qcongest::harness::{fit_scaling, read_csv, run_sweep, Column, Protocol, RunConfig, Sweep};
use qcongest::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qcongest"))
}

const SWEEP: &str = "\
# two sizes of the complete-network protocol
[sweep]
protocol = complete
n = 256, 512
trials = 10
seed = 3

[params]
k = n^1/3
";

#[test]
fn sweep_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.ini");
    fs::write(&cfg, SWEEP).unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let status = bin()
            .args(["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let records = read_csv(outputs[0].as_slice()).unwrap();
    assert_eq!(records.len(), 20);
    assert!(records[..10].iter().all(|r| r.n == 256) && records[10..].iter().all(|r| r.n == 512));
    let header = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(header.starts_with(
        "protocol,n,m,k,tau,eps,gamma,seed,valid,rounds,classical_msgs,quantum_msgs,total_msgs,wall_ms\n"
    ));
}

#[test]
fn config_errors_carry_line_numbers() {
    let bad = SWEEP.replace("k = n^1/3", "eps = 0.1");
    match Sweep::parse(&bad) {
        Err(Error::Config { line, .. }) => assert_eq!(line, 9),
        other => panic!("{other:?}"),
    }
    let bad = SWEEP.replace("trials = 10", "trials = ten");
    assert!(matches!(Sweep::parse(&bad), Err(Error::Config { line: 5, .. })));
    let bad = SWEEP.replace("[params]", "[extras]");
    assert!(matches!(Sweep::parse(&bad), Err(Error::Config { line: 8, .. })));
    let bad = SWEEP.replace("protocol = complete", "protocol = gossip");
    assert!(matches!(Sweep::parse(&bad), Err(Error::Config { line: 3, .. })));
}

#[test]
fn cli_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.ini");
    fs::write(&cfg, SWEEP).unwrap();
    let out = dir.path().join("o.csv");
    let plot = dir.path().join("o.svg");
    let status = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap(), "--trials", "2", "--out"])
        .arg(&out)
        .arg("--plot")
        .arg(&plot)
        .status()
        .unwrap();
    // Two sizes cannot be fitted, so the plot step reports a usage error.
    assert_eq!(status.code(), Some(2));
    assert_eq!(read_csv(fs::File::open(&out).unwrap()).unwrap().len(), 4);
}

#[test]
fn run_fit_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.ini");
    let csv = dir.path().join("s.csv");
    let svg = dir.path().join("s.svg");
    fs::write(
        &cfg,
        format!(
            "[sweep]\nprotocol = agreement\nn = 2^6..2^8\ntrials = 3\nout = {}\nplot = {}\n",
            csv.display(),
            svg.display()
        ),
    )
    .unwrap();
    assert!(bin().args(["sweep", "--config"]).arg(&cfg).status().unwrap().success());
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let out = bin()
        .args(["fit", "--csv", csv.to_str().unwrap(), "--column", "quantum_msgs"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(fit["n_min"], 64);
    assert_eq!(fit["column"], "quantum_msgs");
}

#[test]
fn exit_codes() {
    let run = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(run(&["run", "--protocol", "complete", "--n", "64", "--trials", "2"]), Some(0));
    assert_eq!(run(&["run", "--protocol", "nope", "--n", "64"]), Some(2));
    assert_eq!(run(&["run", "--protocol", "complete"]), Some(2));
    assert_eq!(run(&["validate", "--suite", "everything"]), Some(2));
    assert_eq!(run(&["validate", "--suite", "qprims-oracle"]), Some(0));
    assert_eq!(run(&["fit", "--csv", "/nonexistent.csv"]), Some(1));
}

#[test]
fn run_command_prints_records() {
    let out = bin()
        .args(["run", "--protocol", "rw", "--n", "64", "--trials", "3", "--seed", "9", "--tau", "auto"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let records = read_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(records.len(), 3);
    // Hypercube Q_6, lazy walk, tolerance 1/n².
    assert_eq!(records[0].tau, Some(46));
    assert_eq!(records[0].m, 192);
}

#[test]
fn library_sweep_agrees_with_fit() {
    let config = RunConfig::new(Protocol::TreeMerging, vec![32, 64, 128], 3, 1);
    let runs = run_sweep(&config).unwrap();
    assert_eq!(runs.len(), 9);
    let records: Vec<_> = runs.into_iter().map(|e| e.record).collect();
    let fit = fit_scaling(&records, Column::TotalMsgs).unwrap();
    assert!(fit.slope > 0.0 && fit.residual.is_finite());
    assert!(fit_scaling(&records[..6], Column::TotalMsgs).is_err());
}
