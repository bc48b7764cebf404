//! Command-line front end: `train`, `predict`, `evaluate`, `ablate` and
//! `synth`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
//! `DSNA_THREADS` caps the worker pool used by `predict`, `evaluate` and
//! `ablate`.

mod files;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use dsna_core::dsna::dsna_predict;
use dsna_core::forest::{baseline_predict, train_forest};
use dsna_core::harness::{generate, run_ablation};
use dsna_core::model::{load_model, save_model, ModelFile};
use dsna_core::{evaluate_metrics, load_dataset, Label, Schema, TaskKind};

pub use files::{format_label, read_queries, AblationSpec, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Environment variable holding the worker thread count.
pub const THREADS_VAR: &str = "DSNA_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dsna", version, about = "Cost-sensitive forests with discriminative sparse neighbor approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a forest on a labeled file and write a model file.
    Train(TrainArgs),
    /// Predict one label per query row.
    Predict(PredictArgs),
    /// Score a model on a labeled file.
    Evaluate(EvaluateArgs),
    /// Run the four-arm ablation on a synthetic benchmark.
    Ablate(AblateArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Overrides the forest seed of the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with optional `[forest]` and `[dsna]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train a plain random forest (unit costs, unweighted gain).
    #[arg(long)]
    plain: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Column skipped if present; its values are never read.
    #[arg(long, default_value = "label")]
    label_col: String,
    /// Append iterations, chosen cluster and objective trace to each line.
    #[arg(long)]
    trace: bool,
    /// Predict with the forest vote instead of DSNA.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// TOML file with a `[data]` generator table and optional `[forest]`,
    /// `[dsna]` tables and `seeds` list.
    #[arg(long)]
    spec: PathBuf,
    /// Run seeds 1..=N instead of the spec's seed list.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// TOML generator spec, either top-level or under `[data]`.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: dsna_core::Error| e.to_string())
}

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<dsna_core::Error> for CliError {
    fn from(e: dsna_core::Error) -> Self {
        match e {
            dsna_core::Error::Contract(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Panics are reported as internal errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let outcome = std::panic::catch_unwind(|| configure_threads().and_then(|_| run(cli.command)));
    match outcome {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("dsna: {e}");
            e.exit_code()
        }
        Err(_) => EXIT_INTERNAL,
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got '{value}'")))?;
    // A pool may already exist when called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Ablate(a) => ablate(a),
        Command::Synth(a) => synth(a),
    }
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>, CliError> {
    std::fs::File::open(path).map(std::io::BufReader::new).map_err(|e| io_error(path, e))
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut config = match &a.config {
        Some(p) => TrainConfig::parse(&read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.forest.seed = seed;
    }
    if a.plain {
        config.forest.cost_sensitive = false;
    }
    config.dsna.validate()?;
    let data = load_dataset(open(&a.data)?, &Schema::new(a.label_col, a.task))?;
    let forest = train_forest(&data, &config.forest)?;
    let model = ModelFile::new(forest, config.dsna);
    save_model(&model, &a.out)?;
    println!(
        "trained {} trees on {} samples ({} features) -> {}",
        model.forest.trees.len(),
        data.len(),
        data.dimension(),
        a.out.display()
    );
    Ok(())
}

fn load_checked_model(path: &Path) -> Result<ModelFile, CliError> {
    let model = load_model(path)?;
    model.dsna.validate()?;
    Ok(model)
}

fn check_dimension(model: &ModelFile, found: usize) -> Result<(), CliError> {
    let expected = model.forest.dimension();
    if found != expected {
        return Err(CliError::Data(format!("query rows have {found} features but the model expects {expected}")));
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<(), CliError> {
    let model = load_checked_model(&a.model)?;
    let queries = read_queries(open(&a.data)?, &a.label_col)?;
    check_dimension(&model, queries.dimension)?;
    let lines: Vec<String> = queries
        .rows
        .par_iter()
        .map(|q| -> Result<String, CliError> {
            if a.baseline {
                return Ok(format_label(baseline_predict(&model.forest, q)?));
            }
            let s = dsna_predict(&model.forest, q, &model.dsna)?;
            if !a.trace {
                return Ok(format_label(s.label));
            }
            let trace: Vec<String> = s.objective_trace.iter().map(|v| v.to_string()).collect();
            Ok(format!(
                "{}\titerations={}\tcluster={}/{}\tconverged={}\tneighborhood={}\tobjective={}",
                format_label(s.label),
                s.outer_iterations,
                s.cluster_index,
                s.cluster_count,
                s.converged,
                s.neighborhood_size,
                trace.join(";")
            ))
        })
        .collect::<Result<_, _>>()?;
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    write_output(a.out.as_deref(), &text)
}

fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let model = load_checked_model(&a.model)?;
    let data = load_dataset(open(&a.data)?, &Schema::new(a.label_col, model.task()))?;
    check_dimension(&model, data.dimension())?;
    let predictions: Vec<Label> = data
        .samples()
        .par_iter()
        .map(|s| {
            if a.baseline {
                baseline_predict(&model.forest, &s.features)
            } else {
                dsna_predict(&model.forest, &s.features, &model.dsna).map(|r| r.label)
            }
        })
        .collect::<Result<_, _>>()?;
    let report = evaluate_metrics(&predictions, &data.labels(), model.task())?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_output(a.out.as_deref(), &text)
}

fn ablate(a: AblateArgs) -> Result<(), CliError> {
    let spec = AblationSpec::parse(&read_to_string(&a.spec)?)?;
    let seeds: Vec<u64> = match a.seeds {
        Some(0) => return Err(CliError::Usage("--seeds must be >= 1".into())),
        Some(n) => (1..=n).collect(),
        None => spec.seeds.clone(),
    };
    let data = generate(&spec.data)?;
    let report = run_ablation(&data, &spec.forest, &spec.dsna, &seeds)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| io_error(&a.out_dir, e))?;
    let table = report.to_delimited();
    let files = [
        ("report.csv", table.clone()),
        ("per_group.csv", report.per_group_errors()),
        ("summary.json", files::summary_json(&report)?),
    ];
    for (name, text) in files {
        let path = a.out_dir.join(name);
        std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    }
    write_output(None, &table)
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut spec = files::parse_synthetic_spec(&read_to_string(&a.spec)?)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let data = generate(&spec)?;
    write_output(Some(&a.out), &files::dataset_to_csv(&data))
}
