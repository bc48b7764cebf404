//! Label-aware distance between labeled points.

use crate::data::Label;

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Increasing label-gap weight `g(y) = τ y / (max_gap - y + eps)`.
pub fn label_gap_weight(gap: f64, tau: f64, max_gap: f64, eps: f64) -> f64 {
    tau * gap / ((max_gap - gap).max(0.0) + eps)
}

/// Euclidean distance scaled by how different the labels are: zero for
/// equal classes and one for different classes, or `g(|yi - yj|)` for
/// numeric labels.
pub fn label_aware_distance(xi: &[f64], xj: &[f64], yi: Label, yj: Label, tau: f64, max_gap: f64, eps: f64) -> f64 {
    let factor = match (yi, yj) {
        (Label::Class(a), Label::Class(b)) => {
            if a == b {
                return 0.0;
            }
            1.0
        }
        _ => label_gap_weight((yi.value() - yj.value()).abs(), tau, max_gap, eps),
    };
    if factor == 0.0 {
        return 0.0;
    }
    euclidean(xi, xj) * factor
}

/// Largest absolute label difference in `labels`.
pub(crate) fn max_label_gap(labels: impl IntoIterator<Item = Label>) -> f64 {
    let (lo, hi) = labels
        .into_iter()
        .map(|l| l.value())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}
