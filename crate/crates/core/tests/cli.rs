use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sciu::dataset::load_dataset;
use sciu::pipeline::{RunReport, REPORT_FILE, SNAPSHOT_FILE};
use sciu::synth::summarize;

fn sciu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sciu"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_data(dir: &Path, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join("data.jsonl");
    let mut args = vec![
        "generate",
        "--per-class",
        "40",
        "--seed",
        "5",
        "--out",
        p(&out),
    ];
    args.extend_from_slice(extra);
    let o = sciu(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

const FAST: [&str; 8] = [
    "--epochs",
    "8",
    "--warmup-epochs",
    "2",
    "--lambda",
    "0.3",
    "--batch-size",
    "8",
];

fn run(data: &Path, out: &Path, mode: &str) -> Output {
    let mut args = vec!["run", "--mode", mode, "--data", p(data), "--out", p(out)];
    args.extend_from_slice(&FAST);
    sciu(&args)
}

#[test]
fn generate_summary_matches_file_oracles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let o = sciu(&[
        "generate",
        "--per-class",
        "50",
        "--seed",
        "9",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let s = summarize(&load_dataset(&out, None).unwrap());
    assert!(
        stdout.contains(&format!("clean:       {}", s.clean)),
        "{stdout}"
    );
    assert!(stdout.contains(&format!("low_quality: {}", s.low_quality)));
    assert!(stdout.contains(&format!("mislabeled:  {} ", s.mislabeled)));
    assert_eq!(s.total, 350);
}

#[test]
fn zero_mislabel_rate_gives_no_mislabels() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_data(dir.path(), &["--mislabel-rate", "0"]);
    let s = summarize(&load_dataset(&out, None).unwrap());
    assert_eq!(s.mislabeled, 0);
    assert!(s.low_quality > 0);
}

#[test]
fn bad_flags_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    for args in [
        vec!["generate", "--mislabel-rate", "1.5", "--out", p(&out)],
        vec![
            "generate",
            "--intensity-low",
            "5",
            "--intensity-high",
            "1",
            "--out",
            p(&out),
        ],
        vec![
            "run",
            "--mode",
            "bogus",
            "--data",
            p(&out),
            "--out",
            p(&out),
        ],
        vec!["run", "--out", p(&out)],
        vec!["frobnicate"],
    ] {
        let o = sciu(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    assert!(!out.exists());
}

#[test]
fn invalid_lambda_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), &[]);
    let o = sciu(&[
        "run",
        "--mode",
        "sciu",
        "--lambda",
        "1.5",
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pruning_everything_exits_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), &[]);
    let o = sciu(&[
        "run",
        "--mode",
        "cgp",
        "--lambda",
        "0.999",
        "--epochs",
        "6",
        "--warmup-epochs",
        "1",
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("r")),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn missing_data_file_fails_without_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &dir.path().join("nope.jsonl"),
        &dir.path().join("r"),
        "baseline",
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_writes_directory_and_report_is_read_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), &[]);
    let rd = dir.path().join("run");
    let o = run(&data, &rd, "sciu");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        SNAPSHOT_FILE,
        REPORT_FILE,
        "epochs.csv",
        "confusion.csv",
        "weight_histogram.csv",
        "summary.txt",
    ] {
        assert!(rd.join(f).exists(), "{f}");
    }
    let before = fs::read(rd.join(REPORT_FILE)).unwrap();
    let summary_dir = dir.path().join("summaries");
    let o = sciu(&["report", p(&rd), "--out", p(&summary_dir)]);
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("mode: sciu"));
    assert_eq!(fs::read(rd.join(REPORT_FILE)).unwrap(), before);
    assert_eq!(
        fs::read(summary_dir.join("epochs.csv")).unwrap(),
        fs::read(rd.join("epochs.csv")).unwrap()
    );
}

#[test]
fn baseline_run_has_no_weight_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), &[]);
    let rd = dir.path().join("run");
    assert!(run(&data, &rd, "baseline").status.success());
    assert!(!rd.join("weight_histogram.csv").exists());
    let report = RunReport::load(rd.join(REPORT_FILE)).unwrap();
    assert!(report.weights.is_none());
    assert!(report.pruning_log.is_empty() && report.correction_log.is_empty());
}

#[test]
fn rerun_from_snapshot_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), &[]);
    let first = dir.path().join("first");
    assert!(run(&data, &first, "fgc").status.success());
    let second = dir.path().join("second");
    let o = sciu(&["run", "--config", p(&first), "--out", p(&second)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(first.join(REPORT_FILE)).unwrap(),
        fs::read(second.join(REPORT_FILE)).unwrap()
    );
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), &[]);
    let out = dir.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--param",
        "tau",
        "--values",
        "0.1,0.3",
        "--seeds",
        "0,1",
        "--data",
        p(&data),
        "--out",
        p(&out),
    ];
    args.extend_from_slice(&FAST);
    let o = sciu(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    let runs = fs::read_to_string(out.join("sweep_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 5, "{runs}");
    assert!(String::from_utf8(o.stdout).unwrap().contains("best tau:"));
}
