//! Evaluation metrics for imbalanced classification and regression.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Label, TaskKind};
use crate::error::{ensure, Result};

/// Default number of equal-width label bins for per-bin regression error.
pub const DEFAULT_LABEL_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecall {
    pub class: u32,
    pub support: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinError {
    pub lower: f64,
    pub upper: f64,
    pub support: usize,
    /// `None` when no truth falls in the bin.
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub count: usize,
    /// Fraction of exact matches (classification only).
    pub accuracy: Option<f64>,
    /// Mean absolute error (regression only).
    pub mae: Option<f64>,
    pub per_class_recall: Vec<ClassRecall>,
    /// Geometric mean of the per-class recalls (classification only).
    pub g_mean: Option<f64>,
    pub per_bin_mae: Vec<BinError>,
}

impl MetricsReport {
    pub fn recall_of(&self, class: u32) -> Option<f64> {
        self.per_class_recall.iter().find(|r| r.class == class).map(|r| r.recall)
    }
}

pub fn evaluate_metrics(predictions: &[Label], truths: &[Label], task: TaskKind) -> Result<MetricsReport> {
    evaluate_metrics_with_bins(predictions, truths, task, DEFAULT_LABEL_BINS)
}

/// Like [`evaluate_metrics`], with an explicit number of label bins for
/// the regression breakdown.
pub fn evaluate_metrics_with_bins(
    predictions: &[Label],
    truths: &[Label],
    task: TaskKind,
    bins: usize,
) -> Result<MetricsReport> {
    ensure!(
        predictions.len() == truths.len(),
        Contract,
        "{} predictions for {} truths",
        predictions.len(),
        truths.len()
    );
    ensure!(!truths.is_empty(), Contract, "cannot evaluate an empty prediction list");
    for l in predictions.iter().chain(truths) {
        ensure!(l.task() == task, Contract, "label {l} does not match task {task}");
    }
    match task {
        TaskKind::Classification => Ok(classification_report(predictions, truths)),
        TaskKind::Regression => {
            ensure!(bins >= 1, Contract, "need at least one label bin");
            Ok(regression_report(predictions, truths, bins))
        }
    }
}

fn classification_report(predictions: &[Label], truths: &[Label]) -> MetricsReport {
    let mut hits: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    let mut correct = 0usize;
    for (p, t) in predictions.iter().zip(truths) {
        let t = t.class().expect("checked task");
        let entry = hits.entry(t).or_default();
        entry.1 += 1;
        if p.class() == Some(t) {
            entry.0 += 1;
            correct += 1;
        }
    }
    let per_class_recall: Vec<ClassRecall> = hits
        .into_iter()
        .map(|(class, (hit, support))| ClassRecall { class, support, recall: hit as f64 / support as f64 })
        .collect();
    let g_mean = geometric_mean(per_class_recall.iter().map(|r| r.recall));
    MetricsReport {
        task: TaskKind::Classification,
        count: truths.len(),
        accuracy: Some(correct as f64 / truths.len() as f64),
        mae: None,
        per_class_recall,
        g_mean: Some(g_mean),
        per_bin_mae: Vec::new(),
    }
}

fn geometric_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut log_sum = 0.0;
    let mut n = 0usize;
    for v in values {
        if v <= 0.0 {
            return 0.0;
        }
        log_sum += v.ln();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (log_sum / n as f64).exp()
    }
}

fn regression_report(predictions: &[Label], truths: &[Label], bins: usize) -> MetricsReport {
    let errors: Vec<f64> = predictions.iter().zip(truths).map(|(p, t)| (p.value() - t.value()).abs()).collect();
    let mae = errors.iter().sum::<f64>() / errors.len() as f64;

    let values: Vec<f64> = truths.iter().map(Label::value).collect();
    let binning = LabelBins::over(&values, bins);
    let mut sums = vec![(0.0, 0usize); bins];
    for (v, e) in values.iter().zip(&errors) {
        let b = binning.bin_of(*v);
        sums[b].0 += e;
        sums[b].1 += 1;
    }
    let per_bin_mae = sums
        .into_iter()
        .enumerate()
        .map(|(b, (sum, support))| {
            let (lower, upper) = binning.edges(b);
            BinError { lower, upper, support, mae: (support > 0).then(|| sum / support as f64) }
        })
        .collect();
    MetricsReport {
        task: TaskKind::Regression,
        count: truths.len(),
        accuracy: None,
        mae: Some(mae),
        per_class_recall: Vec::new(),
        g_mean: None,
        per_bin_mae,
    }
}

/// Equal-width bins over a closed label interval. The maximum falls in the
/// last bin; a zero-width range puts everything in bin 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelBins {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl LabelBins {
    pub fn over(values: &[f64], count: usize) -> LabelBins {
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        LabelBins { lower, upper, count: count.max(1) }
    }

    pub fn bin_of(&self, v: f64) -> usize {
        let width = self.upper - self.lower;
        if width <= 0.0 || !width.is_finite() {
            return 0;
        }
        let b = ((v - self.lower) / width * self.count as f64).floor();
        (b.max(0.0) as usize).min(self.count - 1)
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let width = (self.upper - self.lower) / self.count as f64;
        (self.lower + width * bin as f64, self.lower + width * (bin + 1) as f64)
    }

    /// Count of `values` per bin.
    pub fn histogram(&self, values: &[f64]) -> Vec<usize> {
        let mut h = vec![0; self.count];
        for v in values {
            h[self.bin_of(*v)] += 1;
        }
        h
    }
}
