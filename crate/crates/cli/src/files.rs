//! TOML specs, query files and dataset output.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use dsna_core::harness::{AblationReport, SummaryRow, SyntheticSpec};
use dsna_core::{Dataset, DsnaConfig, ForestConfig, Label, TaskKind};

use crate::CliError;

fn toml_error(e: toml::de::Error) -> CliError {
    CliError::Data(format!("spec: {e}"))
}

/// `train --config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub forest: ForestConfig,
    pub dsna: DsnaConfig,
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<TrainConfig, CliError> {
        let config: TrainConfig = toml::from_str(text).map_err(toml_error)?;
        config.forest.validate()?;
        config.dsna.validate()?;
        Ok(config)
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

/// `ablate --spec` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub data: SyntheticSpec,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub dsna: DsnaConfig,
}

impl AblationSpec {
    pub fn parse(text: &str) -> Result<AblationSpec, CliError> {
        let spec: AblationSpec = toml::from_str(text).map_err(toml_error)?;
        if spec.seeds.is_empty() {
            return Err(CliError::Data("spec: seeds must not be empty".into()));
        }
        spec.data.validate()?;
        spec.forest.validate()?;
        spec.dsna.validate()?;
        Ok(spec)
    }
}

/// A generator spec at top level or under a `[data]` table.
pub(crate) fn parse_synthetic_spec(text: &str) -> Result<SyntheticSpec, CliError> {
    let table: toml::Table = toml::from_str(text).map_err(toml_error)?;
    let spec: SyntheticSpec = match table.get("data") {
        Some(data) => data.clone().try_into().map_err(toml_error)?,
        None => toml::Value::Table(table).try_into().map_err(toml_error)?,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn format_label(label: Label) -> String {
    match label {
        Label::Class(c) => c.to_string(),
        Label::Numeric(v) => v.to_string(),
    }
}

/// Header `x1,...,xD,label` followed by one row per sample.
pub(crate) fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for j in 1..=data.dimension() {
        let _ = write!(out, "x{j},");
    }
    out.push_str("label\n");
    for s in data.samples() {
        for x in &s.features {
            let _ = write!(out, "{x},");
        }
        let _ = writeln!(out, "{}", format_label(s.label));
    }
    out
}

/// Feature rows of a query file.
#[derive(Debug, Clone, PartialEq)]
pub struct Queries {
    pub dimension: usize,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a header-first comma-separated query file. The column named
/// `label_col`, if present, is skipped without being parsed.
pub fn read_queries<R: BufRead>(source: R, label_col: &str) -> Result<Queries, CliError> {
    let mut lines = source.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| CliError::Data(e.to_string()))?,
        None => return Err(CliError::Data("query file has no header line".into())),
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let skip = columns.iter().position(|c| *c == label_col);
    let dimension = columns.len() - usize::from(skip.is_some());
    if dimension == 0 {
        return Err(CliError::Data("query file has no feature columns".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| CliError::Data(e.to_string()))?;
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(CliError::Data(format!(
                "line {lineno}: expected {} fields, found {}",
                columns.len(),
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(dimension);
        for (col, field) in fields.iter().enumerate() {
            if Some(col) == skip {
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::Data(format!(
                        "line {lineno}: column '{}': '{field}' is not a finite number",
                        columns[col]
                    )))
                }
            }
        }
        rows.push(row);
    }
    Ok(Queries { dimension, rows })
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    dsna_converged: f64,
    dsna_mean_iterations: f64,
}

#[derive(Serialize)]
struct Summary<'r> {
    task: TaskKind,
    seeds: &'r [u64],
    minority_class: Option<u32>,
    forest_config: &'r ForestConfig,
    dsna_config: &'r DsnaConfig,
    summary: &'r [SummaryRow],
    convergence: Vec<SeedSummary>,
}

/// Configs, per method and metric summaries and DSNA convergence rates,
/// without per-query predictions.
pub(crate) fn summary_json(report: &AblationReport) -> Result<String, CliError> {
    let summary = Summary {
        task: report.task,
        seeds: &report.seeds,
        minority_class: report.minority_class,
        forest_config: &report.forest_config,
        dsna_config: &report.dsna_config,
        summary: &report.summary,
        convergence: report
            .runs
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                dsna_converged: r.dsna_converged,
                dsna_mean_iterations: r.dsna_mean_iterations,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    Ok(text)
}
