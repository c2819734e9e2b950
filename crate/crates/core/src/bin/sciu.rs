use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sciu::dataset::{load_dataset, save_dataset};
use sciu::pipeline::{run_to_dir, sweep, Mode, RunSnapshot, SweepParam, SNAPSHOT_FILE};
use sciu::report::report_cmd;
use sciu::synth::{generate, summarize, SynthConfig};
use sciu::trainer::{ProbSource, ScoreSource, TrainConfig};
use sciu::{Result, SciuError};

/// Noisy-label purification: coarse pruning, fine correction, final training.
#[derive(Parser, Debug)]
#[command(name = "sciu", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset with oracle noise flags.
    Generate(GenerateArgs),
    /// Run one pipeline mode and write a run directory.
    Run(RunArgs),
    /// Run a mode for several values of one hyperparameter.
    Sweep(SweepArgs),
    /// Summarize a run directory or report file.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().n_classes)]
    n_classes: usize,
    #[arg(long, default_value_t = SynthConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SynthConfig::default().per_class)]
    per_class: usize,
    #[arg(long, default_value_t = SynthConfig::default().low_quality_rate)]
    low_quality_rate: f64,
    #[arg(long, default_value_t = SynthConfig::default().mislabel_rate)]
    mislabel_rate: f64,
    #[arg(long, default_value_t = SynthConfig::default().neutral_bias_fraction)]
    neutral_bias_fraction: f64,
    #[arg(long, default_value_t = SynthConfig::default().intensity_range.0)]
    intensity_low: f64,
    #[arg(long, default_value_t = SynthConfig::default().intensity_range.1)]
    intensity_high: f64,
    #[arg(long, default_value_t = SynthConfig::default().cluster_spread)]
    cluster_spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit true_label and quality_flag from the written file.
    #[arg(long)]
    strip_oracle: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Baseline,
    Cgp,
    Fgc,
    Sciu,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Baseline => Mode::Baseline,
            ModeArg::Cgp => Mode::CgpOnly,
            ModeArg::Fgc => Mode::FgcOnly,
            ModeArg::Sciu => Mode::Sciu,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScoreArg {
    AnnotatedClass,
    MaxClass,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProbArg {
    Weighted,
    Unweighted,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParamArg {
    Lambda,
    Tau,
    Window,
}

/// Overrides for [`TrainConfig`]; unset flags keep the base value.
#[derive(Args, Debug, Default)]
struct TrainArgs {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long, alias = "window")]
    window_t: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    score_source: Option<ScoreArg>,
    #[arg(long, value_enum)]
    prob_source: Option<ProbArg>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    weight_hidden: Option<usize>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Start final training from scratch (true) or from the last stage's model.
    #[arg(long)]
    final_from_scratch: Option<bool>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

impl TrainArgs {
    fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            learning_rate,
            momentum,
            batch_size,
            epochs,
            warmup_epochs,
            window_t,
            lambda,
            tau,
            seed,
            embed_dim,
            weight_hidden,
            train_fraction,
            final_from_scratch,
            checkpoint_every
        );
        if let Some(s) = self.score_source {
            c.score_source = match s {
                ScoreArg::AnnotatedClass => ScoreSource::AnnotatedClass,
                ScoreArg::MaxClass => ScoreSource::MaxClass,
            };
        }
        if let Some(p) = self.prob_source {
            c.prob_source = match p {
                ProbArg::Weighted => ProbSource::Weighted,
                ProbArg::Unweighted => ProbSource::Unweighted,
            };
        }
        c
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Dataset file (JSON lines).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Output run directory.
    #[arg(long)]
    out: PathBuf,
    /// Rerun from a saved config.snapshot (or a run directory holding one).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Class count; inferred from the labels when omitted.
    #[arg(long)]
    n_classes: Option<usize>,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    param: ParamArg,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    values: Vec<f64>,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0u64, 1, 2, 3, 4])]
    seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "sciu")]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n_classes: Option<usize>,
    #[command(flatten)]
    train: TrainArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// A run directory or a report.struct file.
    path: PathBuf,
    /// Where to write CSVs and summary.txt (defaults to the run directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn flag_error(e: SciuError) -> SciuError {
    match e {
        SciuError::Validation(msg) => {
            let field = msg.split_whitespace().next().unwrap_or("").to_string();
            let flag = match field.as_str() {
                "intensity_range" => "--intensity-low/--intensity-high".to_string(),
                f => format!("--{}", f.replace('_', "-")),
            };
            SciuError::Usage(format!("invalid {flag}: {msg}"))
        }
        other => other,
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_classes: a.n_classes,
        dim: a.dim,
        per_class: a.per_class,
        low_quality_rate: a.low_quality_rate,
        mislabel_rate: a.mislabel_rate,
        neutral_bias_fraction: a.neutral_bias_fraction,
        intensity_range: (a.intensity_low, a.intensity_high),
        cluster_spread: a.cluster_spread,
        seed: a.seed,
    };
    cfg.validate().map_err(flag_error)?;
    let data = generate(&cfg)?;
    let s = summarize(&data);
    let written = if a.strip_oracle {
        data.strip_oracle()
    } else {
        data
    };
    save_dataset(&written, &a.out)?;
    println!("wrote {} samples to {}", s.total, a.out.display());
    println!("clean:       {}", s.clean);
    println!("low_quality: {}", s.low_quality);
    println!(
        "mislabeled:  {} ({} to neutral)",
        s.mislabeled, s.neutral_mislabeled
    );
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let base = match &a.config {
        Some(p) => {
            let file = if p.is_dir() {
                p.join(SNAPSHOT_FILE)
            } else {
                p.clone()
            };
            Some(RunSnapshot::load(file)?)
        }
        None => None,
    };
    let (data, mode, n_classes, config) = match base {
        Some(s) => (
            a.data.unwrap_or(s.dataset),
            a.mode.map(Mode::from).unwrap_or(s.mode),
            a.n_classes.or(s.n_classes),
            a.train.apply(s.config),
        ),
        None => {
            let data = a
                .data
                .ok_or_else(|| SciuError::Usage("--data is required without --config".into()))?;
            let mode = a
                .mode
                .ok_or_else(|| SciuError::Usage("--mode is required without --config".into()))?;
            (
                data,
                mode.into(),
                a.n_classes,
                a.train.apply(TrainConfig::default()),
            )
        }
    };
    config.validate()?;
    let snapshot = RunSnapshot {
        mode,
        dataset: data,
        n_classes,
        config,
    };
    let report = run_to_dir(&snapshot, &a.out, true)?;
    print!("{}", sciu::report::summary(&report));
    println!("run directory: {}", a.out.display());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let config = a.train.apply(TrainConfig::default());
    config.validate()?;
    let param = match a.param {
        ParamArg::Lambda => SweepParam::Lambda,
        ParamArg::Tau => SweepParam::Tau,
        ParamArg::Window => SweepParam::Window,
    };
    for &v in &a.values {
        param.apply(&config, v)?.validate()?;
    }
    let dataset = load_dataset(&a.data, a.n_classes)?;
    let table = sweep(&config, a.mode.into(), param, &a.values, &a.seeds, |_| {
        Ok(dataset.clone())
    })?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    write(&a.out.join("sweep.csv"), &table.to_csv())?;
    write(&a.out.join("sweep_runs.csv"), &table.runs_csv())?;
    print!("{}", table.to_csv());
    match table.best_value {
        Some(v) => println!("best {}: {v}", param.name()),
        None => println!("best {}: none (every value had a failed run)", param.name()),
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let out = match a.out {
        Some(o) => o,
        None if a.path.is_dir() => a.path.clone(),
        None => a
            .path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let text = report_cmd(&a.path, &out)?;
    print!("{text}");
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> SciuError {
    SciuError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
