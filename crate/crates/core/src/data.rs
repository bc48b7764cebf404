//! Samples, datasets, delimited-text ingestion and feature standardization.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Classification => f.write_str("classification"),
            TaskKind::Regression => f.write_str("regression"),
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classification" | "class" => Ok(TaskKind::Classification),
            "regression" | "numeric" => Ok(TaskKind::Regression),
            other => Err(Error::Schema(format!("unknown task kind '{other}'"))),
        }
    }
}

/// A sample label: a class id or a numeric target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Class(u32),
    Numeric(f64),
}

impl Label {
    pub fn task(&self) -> TaskKind {
        match self {
            Label::Class(_) => TaskKind::Classification,
            Label::Numeric(_) => TaskKind::Regression,
        }
    }

    /// The label as a real number (class ids are cast).
    pub fn value(&self) -> f64 {
        match *self {
            Label::Class(c) => c as f64,
            Label::Numeric(v) => v,
        }
    }

    pub fn class(&self) -> Option<u32> {
        match *self {
            Label::Class(c) => Some(c),
            Label::Numeric(_) => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Class(c) => write!(f, "{c}"),
            Label::Numeric(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub index: usize,
    pub features: Vec<f64>,
    pub label: Label,
}

/// An ordered, validated collection of samples sharing one dimension and
/// one label variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    task: TaskKind,
    dimension: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, task: TaskKind) -> Result<Self> {
        ensure!(!samples.is_empty(), Contract, "dataset must contain at least one sample");
        let dimension = samples[0].features.len();
        ensure!(dimension >= 1, Contract, "feature dimension must be at least 1");
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            ensure!(
                s.features.len() == dimension,
                Contract,
                "sample {} has dimension {} (expected {dimension})",
                s.index,
                s.features.len()
            );
            ensure!(s.features.iter().all(|v| v.is_finite()), Contract, "sample {} has non-finite features", s.index);
            ensure!(
                s.label.task() == task,
                Schema,
                "sample {} has a {} label in a {task} dataset",
                s.index,
                s.label.task()
            );
            if let Label::Numeric(v) = s.label {
                ensure!(v.is_finite(), Contract, "sample {} has a non-finite target", s.index);
            }
            ensure!(seen.insert(s.index), Contract, "duplicate sample index {}", s.index);
        }
        Ok(Dataset { samples, task, dimension })
    }

    /// Builds a dataset from parallel feature rows and labels, indexing rows
    /// by position.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<Label>, task: TaskKind) -> Result<Self> {
        ensure!(
            features.len() == labels.len(),
            Contract,
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        );
        let samples = features
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(index, (features, label))| Sample { index, features, label })
            .collect();
        Dataset::new(samples, task)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn features(&self, pos: usize) -> &[f64] {
        &self.samples[pos].features
    }

    pub fn label(&self, pos: usize) -> Label {
        self.samples[pos].label
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Label values as reals, in sample order.
    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label.value()).collect()
    }

    /// Sorted distinct class ids (empty for regression).
    pub fn classes(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.samples.iter().filter_map(|s| s.label.class()).collect();
        set.into_iter().collect()
    }

    /// A new dataset holding the samples at `positions`, re-indexed by
    /// their new position.
    pub fn subset(&self, positions: &[usize]) -> Result<Dataset> {
        let samples = positions
            .iter()
            .enumerate()
            .map(|(index, &p)| Sample {
                index,
                features: self.samples[p].features.clone(),
                label: self.samples[p].label,
            })
            .collect();
        Dataset::new(samples, self.task)
    }

    fn with_features(&self, rows: Vec<Vec<f64>>) -> Dataset {
        let samples = self
            .samples
            .iter()
            .zip(rows)
            .map(|(s, features)| Sample { index: s.index, features, label: s.label })
            .collect();
        Dataset { samples, task: self.task, dimension: self.dimension }
    }
}

/// Column roles for delimited-text ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub label_column: String,
    pub task: TaskKind,
    pub delimiter: char,
}

impl Schema {
    pub fn new(label_column: impl Into<String>, task: TaskKind) -> Self {
        Schema { label_column: label_column.into(), task, delimiter: ',' }
    }
}

/// Parses a header-first delimited text source. Row order is preserved and
/// sample indices are zero-based row positions.
pub fn load_dataset<R: BufRead>(source: R, schema: &Schema) -> Result<Dataset> {
    let mut lines = source.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(Error::Schema("input has no header line".into())),
        }
    };
    let columns: Vec<&str> = header.split(schema.delimiter).map(str::trim).collect();
    let label_pos: Vec<usize> =
        columns.iter().enumerate().filter(|(_, c)| **c == schema.label_column).map(|(i, _)| i).collect();
    match label_pos.len() {
        0 => return Err(Error::Schema(format!("no column named '{}'", schema.label_column))),
        1 => {}
        _ => return Err(Error::Schema(format!("column '{}' appears more than once", schema.label_column))),
    }
    let label_pos = label_pos[0];
    ensure!(columns.len() >= 2, Schema, "need at least one feature column besides the label");

    let mut samples = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(schema.delimiter).map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let mut features = Vec::with_capacity(columns.len() - 1);
        let mut label = None;
        for (col, field) in fields.iter().enumerate() {
            if col == label_pos {
                label = Some(parse_label(field, schema.task, lineno)?);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("column '{}': '{field}' is not a number", columns[col]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("column '{}': non-finite value", columns[col]),
                });
            }
            features.push(v);
        }
        samples.push(Sample { index: samples.len(), features, label: label.expect("label column present") });
    }
    ensure!(!samples.is_empty(), Schema, "input has a header but no rows");
    Dataset::new(samples, schema.task)
}

fn parse_label(field: &str, task: TaskKind, line: usize) -> Result<Label> {
    match task {
        TaskKind::Classification => {
            if let Ok(c) = field.parse::<u32>() {
                return Ok(Label::Class(c));
            }
            match field.parse::<f64>() {
                Ok(_) => Err(Error::Schema(format!("line {line}: label '{field}' is numeric but not a class id"))),
                Err(_) => Err(Error::Parse { line, message: format!("label '{field}' is not a class id") }),
            }
        }
        TaskKind::Regression => {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("label '{field}' is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: "non-finite label".into() });
            }
            Ok(Label::Numeric(v))
        }
    }
}

/// Per-feature affine map `x -> (x - mean) / scale`. Features with zero
/// spread have `scale == 0` and map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    /// Fits means and population standard deviations.
    pub fn fit(data: &Dataset) -> Scaler {
        let n = data.len() as f64;
        let d = data.dimension();
        let mut mean = vec![0.0; d];
        for s in data.samples() {
            for (m, x) in mean.iter_mut().zip(&s.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in data.samples() {
            for ((v, x), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let sd = (v / n).sqrt();
                // Spread at rounding level of the mean counts as constant.
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Scaler { mean, scale }
    }

    pub fn identity(dimension: usize) -> Scaler {
        Scaler { mean: vec![0.0; dimension], scale: vec![1.0; dimension] }
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| if *s == 0.0 { 0.0 } else { (v - m) / s })
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| if *s == 0.0 { *m } else { v * s + m })
            .collect()
    }

    pub fn transform_dataset(&self, data: &Dataset) -> Result<Dataset> {
        ensure!(
            data.dimension() == self.dimension(),
            Contract,
            "scaler has dimension {} but dataset has {}",
            self.dimension(),
            data.dimension()
        );
        let rows = data.samples().iter().map(|s| self.transform(&s.features)).collect();
        Ok(data.with_features(rows))
    }
}

/// Standardizes every feature to zero mean and unit population variance,
/// returning the transformed dataset and the map that produced it.
pub fn standardize_features(train: &Dataset) -> Result<(Dataset, Scaler)> {
    ensure!(train.len() >= 2, Contract, "standardization needs at least 2 samples, got {}", train.len());
    let scaler = Scaler::fit(train);
    let data = scaler.transform_dataset(train)?;
    Ok((data, scaler))
}
