//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 training divergence, 4 every video failed to score.

pub mod compare;
pub mod predictions;
pub mod trace;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, Section};
use crate::data::{generate_synthetic, load_dataset, read_manifest, write_synthetic, DataError, Dataset, Split, TaskKind};
use crate::model::{CheckpointError, ScoreSchema};
use crate::train::{
    cross_validate, run_ablation, score_checkpoint, train, write_report, AblationId, RunSplits, TrainError, TrainJob,
};

use self::compare::compare_predictions;
use self::predictions::{Predictions, PredictionsError};
use self::trace::{export_traces, file_stem, format_trace, TraceError};

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "ARGES_SEQ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "severity-seq", version, about = "Video severity scoring over frame-feature sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (AFF1 features + manifest).
    Gen(GenArgs),
    /// Train one model; validate on `train.validation_fold`, test on the test split.
    Train(TrainArgs),
    /// k-fold cross-validation over the train split.
    Cv(CvArgs),
    /// Cross-validate all four ablation settings and compare them.
    Ablate(AblateArgs),
    /// Score a manifest with a checkpoint; writes predictions and traces.
    Score(ScoreArgs),
    /// Render attention traces as CSV and SVG heat strips.
    AttentionExport(ExportArgs),
    /// Paired significance test of two prediction files.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Run configuration; only `[data]` is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub task: Option<TaskKind>,
    #[arg(long)]
    pub videos: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub schema: Option<ScoreSchema>,
    #[arg(long)]
    pub signal_strength: Option<f64>,
    #[arg(long)]
    pub noise_scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Manifest file, or a directory containing `manifest.csv`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `train.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `model.schema`.
    #[arg(long)]
    pub schema: Option<ScoreSchema>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub ablation: Option<AblationId>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub ablation: Option<AblationId>,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Manifest file, or a directory containing `manifest.csv`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Trace files written by `score`.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Manifest holding the reference labels.
    #[arg(long)]
    pub truth: PathBuf,
    /// Run configuration; only `[metrics]` is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Predictions(#[from] PredictionsError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("all {0} videos failed to score")]
    AllFailed(usize),
    #[error("{0}")]
    Input(String),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Train(TrainError::InvalidConfig(_) | TrainError::Config(_)) => 2,
            CliError::Train(TrainError::Divergence { .. }) => 3,
            CliError::AllFailed(_) => 4,
            _ => 1,
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join("manifest.csv")
    } else {
        data.to_path_buf()
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

/// Config with flag overrides applied and re-validated, plus the dataset.
fn prepare(run: &RunArgs, ablation: Option<AblationId>) -> Result<(RunConfig, Dataset), CliError> {
    let mut cfg = load_config(run.config.as_deref())?;
    if let Some(seed) = run.seed {
        cfg.train.seed = seed;
    }
    if let Some(schema) = run.schema {
        cfg.model.schema = schema;
    }
    if ablation.is_some() {
        cfg.train.ablation = ablation;
    }
    cfg.model.validate()?;
    cfg.train.validate()?;
    let data = load_dataset(&manifest_path(&run.data), cfg.model.schema)?;
    if data.is_empty() {
        return Err(CliError::Input(format!("no videos labeled for {} in {}", cfg.model.schema, run.data.display())));
    }
    if let Some(d) = data.dim() {
        if d != cfg.model.feature_dim {
            return Err(ConfigError::invalid(
                "model.feature_dim",
                format!("is {} but the dataset features have D={d}", cfg.model.feature_dim),
            )
            .into());
        }
    }
    create_dir(&run.out)?;
    Ok((cfg, data))
}

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let mut spec = load_config(args.config.as_deref())?.data;
    if let Some(t) = args.task {
        spec.task = t;
    }
    if let Some(n) = args.videos {
        spec.num_videos = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(d) = args.dim {
        spec.dim = d;
    }
    if let Some(s) = args.schema.filter(|&s| s != spec.schema) {
        spec = spec.with_schema(s);
    }
    if let Some(s) = args.signal_strength {
        spec.signal_strength = s;
    }
    if let Some(s) = args.noise_scale {
        spec.noise_scale = s;
    }
    let ds = generate_synthetic(&spec)?;
    let manifest = write_synthetic(&args.out, &ds)?;
    write(&args.out.join("data.toml"), &spec.to_section_string())?;
    println!("wrote {} videos to {}", ds.videos.len(), manifest.display());
    for (c, n) in ds.class_counts().iter().enumerate() {
        println!("{} score {}: {n}", spec.schema, spec.schema.score_of(c));
    }
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let (cfg, data) = prepare(&args.run, args.ablation)?;
    let train_rows = data.indices(Split::Train);
    let folds = data.num_folds();
    let (tr, va) = if folds >= 2 {
        let v = cfg.train.validation_fold;
        if v >= folds {
            return Err(ConfigError::invalid("train.validation_fold", format!("{v} but the data has folds 0..{folds}")).into());
        }
        data.fold_split(v)
    } else {
        (train_rows, Vec::new())
    };
    let out = &args.run.out;
    write(&out.join("config.toml"), &cfg.to_canonical_string())?;
    let outcome = train(&TrainJob {
        model: &cfg.model,
        train: &cfg.train,
        metrics: &cfg.metrics,
        data: &data,
        splits: RunSplits {
            train: tr,
            validation: va,
            test: data.indices(Split::Test),
        },
        checkpoint: Some(out.join("model.ckpt")),
        label: cfg.train.ablation.map_or("train".to_string(), |a| a.to_string()),
    })?;
    let report = out.join("report.txt");
    write_report(&report, &outcome.record)?;
    print!("{}", outcome.record.body());
    eprintln!("report: {}", report.display());
    Ok(())
}

/// Keeps the manifest's folds when they already cover `0..k`, else reassigns.
fn ensure_folds(data: &mut Dataset, k: usize, seed: u64) {
    let train = data.indices(Split::Train);
    let usable = data.num_folds() == k && train.iter().all(|&i| data.examples[i].fold.is_some());
    if !usable {
        log::info!("assigning {k} stratified folds (seed {seed})");
        data.refold(k, seed);
    }
}

pub fn cmd_cv(args: &CvArgs) -> Result<(), CliError> {
    let (cfg, mut data) = prepare(&args.run, args.ablation)?;
    ensure_folds(&mut data, args.k, cfg.train.seed);
    let out = &args.run.out;
    let ckpts = out.join("checkpoints");
    create_dir(&ckpts)?;
    write(&out.join("config.toml"), &cfg.to_canonical_string())?;
    let cv = cross_validate(&cfg.model, &cfg.train, &cfg.metrics, &data, args.k, Some(&ckpts))?;
    for (i, r) in cv.records.iter().enumerate() {
        write_report(&out.join(format!("fold-{i}.txt")), r)?;
    }
    let summary = cv.summary();
    write(&out.join("cv_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<(), CliError> {
    let (cfg, mut data) = prepare(&args.run, None)?;
    ensure_folds(&mut data, args.k, cfg.train.seed);
    let out = &args.run.out;
    let ckpts = out.join("checkpoints");
    create_dir(&ckpts)?;
    write(&out.join("config.toml"), &cfg.to_canonical_string())?;
    let table = run_ablation(&cfg.model, &cfg.train, &cfg.metrics, &data, args.k, Some(&ckpts))?;
    for row in &table.rows {
        let dir = out.join(row.id.name());
        create_dir(&dir)?;
        for (i, r) in row.cv.records.iter().enumerate() {
            write_report(&dir.join(format!("fold-{i}.txt")), r)?;
        }
    }
    let report = table.report();
    write(&out.join("ablation.csv"), &report)?;
    print!("{report}");
    Ok(())
}

pub fn cmd_score(args: &ScoreArgs) -> Result<(), CliError> {
    let manifest = manifest_path(&args.data);
    let (model, scored) = score_checkpoint(&args.checkpoint, &manifest)?;
    let schema = model.config().schema;
    let traces = args.out.join("traces");
    create_dir(&traces)?;
    write(
        &args.out.join("predictions.csv"),
        &Predictions::from_scored(schema, &scored.scored).to_csv(),
    )?;
    for s in &scored.scored {
        let path = traces.join(format!("{}.csv", file_stem(&s.video_id)));
        write(&path, &format_trace(&s.prediction.trace))?;
    }
    let mut failures = String::from("video_id,reason\n");
    for (id, reason) in &scored.failures {
        log::warn!("{id}: {reason}");
        failures.push_str(&format!("{id},\"{}\"\n", reason.replace('"', "\"\"")));
    }
    write(&args.out.join("failures.csv"), &failures)?;
    println!("scored {} videos, {} failed", scored.scored.len(), scored.failures.len());
    if scored.scored.is_empty() && !scored.failures.is_empty() {
        return Err(CliError::AllFailed(scored.failures.len()));
    }
    Ok(())
}

pub fn cmd_attention_export(args: &ExportArgs) -> Result<(), CliError> {
    let summary = export_traces(&args.traces, &args.out)?;
    for (csv, svg) in &summary.written {
        println!("{} {}", csv.display(), svg.display());
    }
    if summary.written.is_empty() {
        return Err(CliError::Input(format!("none of the {} traces could be read", summary.skipped.len())));
    }
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let metrics = load_config(args.config.as_deref())?.metrics;
    let a = Predictions::read(&args.a)?;
    let b = Predictions::read(&args.b)?;
    let truth = read_manifest(&manifest_path(&args.truth))?;
    let report = compare_predictions(&a, &b, &truth, &metrics).map_err(CliError::Input)?;
    let text = report.to_text();
    if let Some(out) = &args.out {
        write(out, &text)?;
    }
    print!("{text}");
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Score(a) => cmd_score(a),
        Command::AttentionExport(a) => cmd_attention_export(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::invalid(THREADS_ENV, format!("`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::invalid(THREADS_ENV, e.to_string()))
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().map_err(CliError::from).and_then(|()| run(&cli));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["x", "cv", "--data", "d", "--out", "o", "--k", "3", "--schema", "vascular"]).unwrap();
        match cli.command {
            Command::Cv(a) => {
                assert_eq!(a.k, 3);
                assert_eq!(a.run.schema, Some(ScoreSchema::Vascular));
            }
            other => panic!("{other:?}"),
        }
        let cli = Cli::try_parse_from(["x", "attention-export", "--out", "o", "a.csv", "b.csv"]).unwrap();
        assert!(matches!(cli.command, Command::AttentionExport(ref a) if a.traces.len() == 2));
        assert!(Cli::try_parse_from(["x", "train", "--data", "d", "--out", "o", "--ablation", "nope"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::from(ConfigError::invalid("train.epochs", "x")).exit_code(), 2);
        let div = TrainError::Divergence {
            epoch: 1,
            step: 0,
            checkpoint: None,
        };
        assert_eq!(CliError::from(div).exit_code(), 3);
        assert_eq!(CliError::AllFailed(2).exit_code(), 4);
        assert_eq!(CliError::Input("x".into()).exit_code(), 1);
    }
}
