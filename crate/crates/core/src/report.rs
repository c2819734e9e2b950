//! Human-readable summaries and plot-ready CSVs derived from a [`RunReport`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, SciuError};
use crate::pipeline::{RunReport, REPORT_FILE, WEIGHT_BINS};

pub const EPOCHS_CSV: &str = "epochs.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const WEIGHTS_CSV: &str = "weight_histogram.csv";
pub const SUMMARY_TXT: &str = "summary.txt";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

pub fn epochs_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "stage,epoch,mean_loss,train_war,train_uar,test_war,test_uar,active_samples,cumulative_pruned,cumulative_corrected\n",
    );
    for stage in &report.stages {
        for e in &stage.epochs {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{},{},{},{},{}",
                stage.stage.name(),
                e.epoch,
                e.mean_loss,
                e.train_war,
                e.train_uar,
                opt(e.test_war),
                opt(e.test_uar),
                e.active_samples,
                e.cumulative_pruned,
                e.cumulative_corrected
            );
        }
    }
    out
}

/// Kept/pruned weight counts per bin; `None` for runs without pruning.
pub fn weight_histogram_csv(report: &RunReport) -> Option<String> {
    let w = report.weights.as_ref()?;
    let mut out = String::from("bin_low,bin_high,kept,pruned\n");
    for b in 0..WEIGHT_BINS {
        let _ = writeln!(
            out,
            "{:.1},{:.1},{},{}",
            b as f64 / WEIGHT_BINS as f64,
            (b + 1) as f64 / WEIGHT_BINS as f64,
            w.kept_histogram.counts[b],
            w.pruned_histogram.counts[b]
        );
    }
    Some(out)
}

pub fn summary(report: &RunReport) -> String {
    let yn = |b: bool| if b { "yes" } else { "no" };
    let mut out = String::new();
    let _ = writeln!(out, "mode: {} (seed {})", report.mode, report.config.seed);
    let _ = writeln!(
        out,
        "data: {} samples ({} train / {} test), {} classes, dim {}",
        report.dataset.samples,
        report.dataset.train,
        report.dataset.test,
        report.dataset.n_classes,
        report.dataset.dim
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<5} {:<5} {:>8} {:>8} {:>8} {:>10}",
        "CGP", "FGC", "WAR", "UAR", "Pruned", "Corrected"
    );
    let _ = writeln!(
        out,
        "{:<5} {:<5} {:>8.4} {:>8.4} {:>8} {:>10}",
        yn(report.mode.uses_cgp()),
        yn(report.mode.uses_fgc()),
        report.final_test.war,
        report.final_test.uar,
        report.pruned_total,
        report.corrected_total
    );
    if !report.final_test.uar_excluded_classes.is_empty() {
        let _ = writeln!(
            out,
            "note: classes {:?} have no test samples and are excluded from UAR",
            report.final_test.uar_excluded_classes
        );
    }
    if let Some(q) = &report.pruning_quality {
        let _ = writeln!(
            out,
            "pruning vs oracle: precision {} recall {} ({} of {} low-quality pruned)",
            opt(q.precision),
            opt(q.recall),
            q.pruned_low_quality,
            q.low_quality
        );
    }
    if let Some(q) = &report.correction_quality {
        let _ = writeln!(
            out,
            "correction vs oracle: accuracy {} harmful rate {} ({} events)",
            opt(q.correction_accuracy),
            opt(q.harmful_rate),
            q.events
        );
    }
    if let Some(w) = &report.weights {
        let _ = writeln!(
            out,
            "mean learned weight: kept {} pruned {}",
            opt(w.kept_mean),
            opt(w.pruned_mean)
        );
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| SciuError::io(path, e))
}

/// Writes every CSV sidecar and the text summary into `dir`.
pub fn write_sidecars(report: &RunReport, dir: &Path) -> Result<()> {
    write(dir, EPOCHS_CSV, &epochs_csv(report))?;
    write(dir, CONFUSION_CSV, &report.final_test.confusion.to_csv())?;
    if let Some(csv) = weight_histogram_csv(report) {
        write(dir, WEIGHTS_CSV, &csv)?;
    }
    write(dir, SUMMARY_TXT, &summary(report))
}

/// Reads a report (a `report.struct` file or a run directory containing one)
/// and writes summaries into `out_dir`. Never touches the report itself.
pub fn report_cmd(report_path: &Path, out_dir: &Path) -> Result<String> {
    let file = if report_path.is_dir() {
        report_path.join(REPORT_FILE)
    } else {
        report_path.to_path_buf()
    };
    let report = RunReport::load(&file)?;
    fs::create_dir_all(out_dir).map_err(|e| SciuError::io(out_dir, e))?;
    write_sidecars(&report, out_dir)?;
    Ok(summary(&report))
}
