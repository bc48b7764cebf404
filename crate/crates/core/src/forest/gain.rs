//! Information gain reweighted by inverse label frequencies.
//!
//! For classification each sample carries the weight of its class, the
//! weighted class probabilities are `p_c ∝ w_c n_c` and the impurity is
//! the natural-log entropy. For regression each sample carries the weight
//! of its label bin and the impurity is the weighted label variance. In
//! both cases children are mixed by their share of the parent's weight.

use std::collections::BTreeMap;

use crate::data::Label;
use crate::error::{ensure, Result};
use crate::metrics::LabelBins;

/// Per-label weights used when scoring splits.
#[derive(Debug, Clone, PartialEq)]
pub enum GainWeights {
    Uniform,
    /// Weight per class id; classes not listed weigh 1.
    Classes(BTreeMap<u32, f64>),
    /// Weight per label bin.
    Bins {
        bins: LabelBins,
        weights: Vec<f64>,
    },
}

impl GainWeights {
    /// Inverse class frequencies of `labels`.
    pub fn inverse_class_frequency(labels: &[u32]) -> GainWeights {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for c in labels {
            *counts.entry(*c).or_default() += 1;
        }
        GainWeights::Classes(counts.into_iter().map(|(c, n)| (c, 1.0 / n as f64)).collect())
    }

    /// Inverse frequencies of `bins` equal-width bins over `values`.
    pub fn inverse_bin_frequency(values: &[f64], bins: usize) -> GainWeights {
        let bins = LabelBins::over(values, bins);
        let weights = bins.histogram(values).into_iter().map(|n| if n == 0 { 0.0 } else { 1.0 / n as f64 }).collect();
        GainWeights::Bins { bins, weights }
    }

    pub fn weight_of(&self, label: Label) -> f64 {
        match (self, label) {
            (GainWeights::Uniform, _) => 1.0,
            (GainWeights::Classes(map), Label::Class(c)) => map.get(&c).copied().unwrap_or(1.0),
            (GainWeights::Classes(_), Label::Numeric(_)) => 1.0,
            (GainWeights::Bins { bins, weights }, l) => weights[bins.bin_of(l.value())],
        }
    }
}

/// Entropy of a vector of nonnegative class masses.
pub(crate) fn entropy(masses: &[f64]) -> f64 {
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &m in masses {
        if m > 0.0 {
            let p = m / total;
            h -= p * p.ln();
        }
    }
    h
}

/// Weighted variance from the sums `W = Σw`, `S1 = Σw·y`, `S2 = Σw·y²` of
/// labels already shifted near their mean.
pub(crate) fn weighted_variance(w: f64, s1: f64, s2: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let m = s1 / w;
    (s2 / w - m * m).max(0.0)
}

/// Reweighted information gain of splitting `parent` into `left` and
/// `right`.
pub fn reweighted_information_gain(
    parent: &[Label],
    left: &[Label],
    right: &[Label],
    weights: &GainWeights,
) -> Result<f64> {
    ensure!(!left.is_empty() && !right.is_empty(), Contract, "both children of a split must be nonempty");
    ensure!(
        left.len() + right.len() == parent.len(),
        Contract,
        "children hold {} samples but parent holds {}",
        left.len() + right.len(),
        parent.len()
    );
    let key = |l: &Label| (l.task() == crate::data::TaskKind::Regression, l.value());
    let mut whole: Vec<(bool, f64)> = parent.iter().map(key).collect();
    let mut parts: Vec<(bool, f64)> = left.iter().chain(right).map(key).collect();
    let order = |a: &(bool, f64), b: &(bool, f64)| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1));
    whole.sort_by(order);
    parts.sort_by(order);
    ensure!(whole == parts, Contract, "children are not a partition of the parent");
    let task = parent[0].task();
    ensure!(
        parent.iter().chain(left).chain(right).all(|l| l.task() == task),
        Contract,
        "mixed label variants in gain computation"
    );
    let impurity = |set: &[Label]| -> (f64, f64) {
        match task {
            crate::data::TaskKind::Classification => {
                let mut masses: BTreeMap<u32, f64> = BTreeMap::new();
                for l in set {
                    *masses.entry(l.class().expect("checked")).or_default() += weights.weight_of(*l);
                }
                let m: Vec<f64> = masses.into_values().collect();
                (m.iter().sum(), entropy(&m))
            }
            crate::data::TaskKind::Regression => {
                let shift = parent.iter().map(Label::value).sum::<f64>() / parent.len() as f64;
                let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for l in set {
                    let wi = weights.weight_of(*l);
                    let y = l.value() - shift;
                    w += wi;
                    s1 += wi * y;
                    s2 += wi * y * y;
                }
                (w, weighted_variance(w, s1, s2))
            }
        }
    };
    let (w, h) = impurity(parent);
    let (wl, hl) = impurity(left);
    let (wr, hr) = impurity(right);
    if w <= 0.0 {
        return Ok(0.0);
    }
    Ok(h - (wl / w) * hl - (wr / w) * hr)
}
