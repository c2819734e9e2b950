//! End-to-end runs: purification stages followed by final training, plus
//! hyperparameter sweeps and the on-disk run layout.
//!
//! An output directory holds `config.snapshot` (everything needed to rerun),
//! `report.struct` (the [`RunReport`] as JSON) and CSV sidecars.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cgp::PruneEvent;
use crate::dataset::{load_dataset, stratified_split, CorrectionEvent, Dataset};
use crate::error::{Result, SciuError};
use crate::metrics::{
    correction_quality, median, pruning_quality, uar, war, ConfusionMatrix, CorrectionQuality,
    Histogram, PruningQuality,
};
use crate::trainer::{evaluate, train_stage, EpochRecord, StageKind, StageOptions, TrainConfig};

pub const SNAPSHOT_FILE: &str = "config.snapshot";
pub const REPORT_FILE: &str = "report.struct";
pub const WEIGHT_BINS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Baseline,
    #[serde(rename = "cgp")]
    CgpOnly,
    #[serde(rename = "fgc")]
    FgcOnly,
    Sciu,
}

impl Mode {
    pub fn uses_cgp(self) -> bool {
        matches!(self, Mode::CgpOnly | Mode::Sciu)
    }

    pub fn uses_fgc(self) -> bool {
        matches!(self, Mode::FgcOnly | Mode::Sciu)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::CgpOnly => "cgp",
            Mode::FgcOnly => "fgc",
            Mode::Sciu => "sciu",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = SciuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Mode::Baseline),
            "cgp" | "cgp_only" => Ok(Mode::CgpOnly),
            "fgc" | "fgc_only" => Ok(Mode::FgcOnly),
            "sciu" => Ok(Mode::Sciu),
            other => Err(SciuError::Usage(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub train: usize,
    pub test: usize,
    pub n_classes: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: StageKind,
    pub input_samples: usize,
    pub output_samples: usize,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub war: f64,
    pub uar: f64,
    pub uar_excluded_classes: Vec<usize>,
    pub confusion: ConfusionMatrix,
}

/// Learned weights of kept versus pruned samples at the end of pruning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub kept_mean: Option<f64>,
    pub pruned_mean: Option<f64>,
    pub kept_histogram: Histogram,
    pub pruned_histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub config: TrainConfig,
    pub dataset: DatasetSummary,
    pub stages: Vec<StageReport>,
    pub pruning_log: Vec<PruneEvent>,
    pub correction_log: Vec<CorrectionEvent>,
    pub pruned_total: usize,
    pub corrected_total: usize,
    pub final_test: FinalMetrics,
    pub pruning_quality: Option<PruningQuality>,
    pub correction_quality: Option<CorrectionQuality>,
    pub weights: Option<WeightReport>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SciuError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SciuError::io(path, e))?;
        RunReport::from_json(&text)
    }

    pub fn stage(&self, kind: StageKind) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == kind)
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Runs `mode` on `dataset`: stratified split, purification stages in
/// CGP → FGC order, then plain training on the purified set and evaluation on
/// the held-out split.
pub fn run_pipeline(config: &TrainConfig, dataset: &Dataset, mode: Mode) -> Result<RunReport> {
    run_pipeline_with(config, dataset, mode, None)
}

pub fn run_pipeline_with(
    config: &TrainConfig,
    dataset: &Dataset,
    mode: Mode,
    checkpoint_dir: Option<&Path>,
) -> Result<RunReport> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(SciuError::Config("dataset is empty".into()));
    }
    let (train, test) = stratified_split(dataset, config.train_fraction, config.seed)?;
    let opts = |init| StageOptions {
        test: Some(&test),
        init,
        checkpoint_dir: checkpoint_dir.map(Path::to_path_buf),
    };

    let mut stages = Vec::new();
    let mut pruning_log = Vec::new();
    let mut correction_log = Vec::new();
    let mut pruned_ids = Default::default();
    let mut weights = None;
    let mut current = train.clone();
    let mut carried = None;

    if mode.uses_cgp() {
        let out = train_stage(&current, config, StageKind::Cgp, opts(None))?;
        let (mut kept, mut pruned) = (Vec::new(), Vec::new());
        for (id, w) in &out.decision_weights {
            if out.pruned_ids.contains(id) {
                pruned.push(*w);
            } else {
                kept.push(*w);
            }
        }
        weights = Some(WeightReport {
            kept_mean: mean(&kept),
            pruned_mean: mean(&pruned),
            kept_histogram: Histogram::unit(WEIGHT_BINS, kept.iter().copied()),
            pruned_histogram: Histogram::unit(WEIGHT_BINS, pruned.iter().copied()),
        });
        stages.push(StageReport {
            stage: StageKind::Cgp,
            input_samples: current.len(),
            output_samples: out.dataset.len(),
            epochs: out.epochs,
        });
        pruning_log = out.prune_log;
        pruned_ids = out.pruned_ids;
        current = out.dataset;
        carried = Some(out.model);
    }
    if mode.uses_fgc() {
        let out = train_stage(&current, config, StageKind::Fgc, opts(None))?;
        stages.push(StageReport {
            stage: StageKind::Fgc,
            input_samples: current.len(),
            output_samples: out.dataset.len(),
            epochs: out.epochs,
        });
        correction_log = out.correction_log;
        current = out.dataset;
        carried = Some(out.model);
    }

    let init = if config.final_from_scratch {
        None
    } else {
        carried
    };
    let out = train_stage(&current, config, StageKind::Plain, opts(init))?;
    stages.push(StageReport {
        stage: StageKind::Plain,
        input_samples: current.len(),
        output_samples: out.dataset.len(),
        epochs: out.epochs,
    });
    let cm = evaluate(&out.model, &test)?;
    let u = uar(&cm)?;
    let final_test = FinalMetrics {
        war: war(&cm)?,
        uar: u.value,
        uar_excluded_classes: u.excluded_classes,
        confusion: cm,
    };

    // Oracle-side quality; silently absent when the data carries no oracle.
    let pruning_quality = if mode.uses_cgp() {
        pruning_quality(&pruned_ids, &train).ok()
    } else {
        None
    };
    let correction_quality = if mode.uses_fgc() {
        correction_quality(&correction_log, &train).ok()
    } else {
        None
    };

    Ok(RunReport {
        mode,
        config: config.clone(),
        dataset: DatasetSummary {
            samples: dataset.len(),
            train: train.len(),
            test: test.len(),
            n_classes: dataset.n_classes(),
            dim: dataset.dim(),
        },
        stages,
        pruned_total: pruning_log.len(),
        corrected_total: correction_log.len(),
        pruning_log,
        correction_log,
        final_test,
        pruning_quality,
        correction_quality,
        weights,
    })
}

/// Everything needed to rerun a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSnapshot {
    pub mode: Mode,
    pub dataset: PathBuf,
    pub n_classes: Option<usize>,
    pub config: TrainConfig,
}

impl RunSnapshot {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SciuError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| SciuError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshot serializes");
        s.push('\n');
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| SciuError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| SciuError::io(path, e))
}

/// Loads the snapshot's dataset, runs it and writes the run directory.
pub fn run_to_dir(snapshot: &RunSnapshot, out_dir: &Path, checkpoints: bool) -> Result<RunReport> {
    let dataset = load_dataset(&snapshot.dataset, snapshot.n_classes)?;
    create_dir(out_dir)?;
    let ckpt_dir = out_dir.join("checkpoints");
    if checkpoints && snapshot.config.checkpoint_every > 0 {
        create_dir(&ckpt_dir)?;
    }
    let report = run_pipeline_with(
        &snapshot.config,
        &dataset,
        snapshot.mode,
        (checkpoints && snapshot.config.checkpoint_every > 0).then_some(ckpt_dir.as_path()),
    )?;
    write_file(&out_dir.join(SNAPSHOT_FILE), &snapshot.to_json())?;
    write_file(&out_dir.join(REPORT_FILE), &report.to_json())?;
    crate::report::write_sidecars(&report, out_dir)?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda,
    Tau,
    Window,
}

impl FromStr for SweepParam {
    type Err = SciuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(SweepParam::Lambda),
            "tau" => Ok(SweepParam::Tau),
            "window" | "window_t" => Ok(SweepParam::Window),
            other => Err(SciuError::Usage(format!(
                "unknown sweep parameter '{other}'"
            ))),
        }
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Tau => "tau",
            SweepParam::Window => "window",
        }
    }

    pub fn apply(self, config: &TrainConfig, value: f64) -> Result<TrainConfig> {
        let mut c = config.clone();
        match self {
            SweepParam::Lambda => c.lambda = value,
            SweepParam::Tau => c.tau = value,
            SweepParam::Window => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(SciuError::Usage(format!(
                        "window values must be positive integers, got {value}"
                    )));
                }
                c.window_t = value as usize;
            }
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub seed: u64,
    pub war: Option<f64>,
    pub uar: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub runs: Vec<SweepRun>,
    pub median_war: Option<f64>,
    pub median_uar: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub mode: Mode,
    pub rows: Vec<SweepRow>,
    /// Value with the highest median WAR (first on ties).
    pub best_value: Option<f64>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},median_war,median_uar,ok_runs,failed_runs,status\n",
            self.param.name()
        );
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"));
        for r in &self.rows {
            let failed = r.runs.iter().filter(|x| x.error.is_some()).count();
            let status = if failed == 0 {
                "ok".to_string()
            } else {
                let msgs: Vec<&str> = r.runs.iter().filter_map(|x| x.error.as_deref()).collect();
                format!("failed: {}", msgs.join(" | ").replace(',', ";"))
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.value,
                fmt(r.median_war),
                fmt(r.median_uar),
                r.runs.len() - failed,
                failed,
                status
            ));
        }
        out
    }

    pub fn runs_csv(&self) -> String {
        let mut out = format!("{},seed,war,uar,error\n", self.param.name());
        for r in &self.rows {
            for run in &r.runs {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.value,
                    run.seed,
                    run.war.map_or("NA".into(), |v| format!("{v:.6}")),
                    run.uar.map_or("NA".into(), |v| format!("{v:.6}")),
                    run.error.as_deref().unwrap_or("").replace(',', ";"),
                ));
            }
        }
        out
    }
}

/// Runs `mode` once per (value, seed). The `datasets` closure supplies the
/// data for a seed, so callers can either share one dataset or regenerate it
/// per seed. Failed runs are kept as rows with an error message.
pub fn sweep<F>(
    config: &TrainConfig,
    mode: Mode,
    param: SweepParam,
    values: &[f64],
    seeds: &[u64],
    mut datasets: F,
) -> Result<SweepTable>
where
    F: FnMut(u64) -> Result<Dataset>,
{
    if values.is_empty() || seeds.is_empty() {
        return Err(SciuError::Usage(
            "a sweep needs at least one value and one seed".into(),
        ));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let base = param.apply(config, value)?;
        let mut runs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let cfg = TrainConfig {
                seed,
                ..base.clone()
            };
            let result = datasets(seed).and_then(|d| run_pipeline(&cfg, &d, mode));
            runs.push(match result {
                Ok(r) => SweepRun {
                    seed,
                    war: Some(r.final_test.war),
                    uar: Some(r.final_test.uar),
                    error: None,
                },
                Err(e) => SweepRun {
                    seed,
                    war: None,
                    uar: None,
                    error: Some(e.to_string()),
                },
            });
        }
        let wars: Vec<f64> = runs.iter().filter_map(|r| r.war).collect();
        let uars: Vec<f64> = runs.iter().filter_map(|r| r.uar).collect();
        // a value with any failed seed gets no median
        let complete = wars.len() == runs.len();
        rows.push(SweepRow {
            value,
            median_war: if complete { median(&wars) } else { None },
            median_uar: if complete { median(&uars) } else { None },
            runs,
        });
    }
    let mut best: Option<(f64, f64)> = None;
    for r in &rows {
        if let Some(w) = r.median_war {
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((r.value, w));
            }
        }
    }
    Ok(SweepTable {
        param,
        mode,
        rows,
        best_value: best.map(|(v, _)| v),
    })
}
