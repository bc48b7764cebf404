//! Node-level operations: candidate feature ranking, learned cost-sensitive
//! splits and the median fallback.

use rand::seq::index;
use rand::Rng;

use super::gain::{entropy, weighted_variance, GainWeights};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::metrics::LabelBins;
use crate::solvers::{cost_weight, fit_weighted_svm, fit_weighted_svr, LinearModel};

/// Number of random probes used to seed 2-means.
pub const TWO_MEANS_PROBES: usize = 16;
/// Lloyd iterations of the node 2-means.
pub const TWO_MEANS_ITERS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Targets {
    Classes { ids: Vec<usize>, count: usize },
    Values(Vec<f64>),
}

/// Training rows with dense labels and per-row gain weights.
#[derive(Debug, Clone)]
pub struct TrainingView<'a> {
    rows: &'a [Vec<f64>],
    targets: Targets,
    gain_weights: Vec<f64>,
}

impl<'a> TrainingView<'a> {
    /// `labels` must share one variant. Class labels are mapped to dense
    /// ids in ascending order.
    pub fn new(rows: &'a [Vec<f64>], labels: &[Label], weights: &GainWeights) -> TrainingView<'a> {
        assert_eq!(rows.len(), labels.len());
        let targets = match labels.first() {
            Some(Label::Class(_)) => {
                let mut classes: Vec<u32> = labels.iter().filter_map(Label::class).collect();
                classes.sort_unstable();
                classes.dedup();
                let ids = labels
                    .iter()
                    .map(|l| classes.binary_search(&l.class().expect("homogeneous labels")).expect("present"))
                    .collect();
                Targets::Classes { ids, count: classes.len() }
            }
            _ => Targets::Values(labels.iter().map(Label::value).collect()),
        };
        let gain_weights = labels.iter().map(|l| weights.weight_of(*l)).collect();
        TrainingView { rows, targets, gain_weights }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        self.rows
    }

    pub fn dimension(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn value(&self, pos: usize) -> f64 {
        match &self.targets {
            Targets::Classes { ids, .. } => ids[pos] as f64,
            Targets::Values(v) => v[pos],
        }
    }

    /// True when every position carries the same label.
    pub fn is_pure(&self, positions: &[usize]) -> bool {
        match positions.split_first() {
            None => true,
            Some((first, rest)) => {
                let v = self.value(*first);
                rest.iter().all(|p| self.value(*p) == v)
            }
        }
    }

    /// Reweighted information gain of a partition of `parent`.
    pub fn partition_gain(&self, parent: &[usize], left: &[usize], right: &[usize]) -> f64 {
        let (w, h) = self.impurity(parent, parent);
        if w <= 0.0 {
            return 0.0;
        }
        let (wl, hl) = self.impurity(left, parent);
        let (wr, hr) = self.impurity(right, parent);
        h - (wl / w) * hl - (wr / w) * hr
    }

    fn impurity(&self, set: &[usize], parent: &[usize]) -> (f64, f64) {
        match &self.targets {
            Targets::Classes { ids, count } => {
                let mut masses = vec![0.0; *count];
                for &p in set {
                    masses[ids[p]] += self.gain_weights[p];
                }
                (masses.iter().sum(), entropy(&masses))
            }
            Targets::Values(v) => {
                let shift = parent.iter().map(|p| v[*p]).sum::<f64>() / parent.len() as f64;
                let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for &p in set {
                    let wi = self.gain_weights[p];
                    let y = v[p] - shift;
                    w += wi;
                    s1 += wi * y;
                    s2 += wi * y * y;
                }
                (w, weighted_variance(w, s1, s2))
            }
        }
    }

    /// Best gain of a single-feature threshold split, thresholds at the
    /// midpoints of consecutive distinct values. Zero when the feature is
    /// constant on the node.
    pub fn best_threshold_gain(&self, positions: &[usize], feature: usize) -> f64 {
        let mut order: Vec<usize> = positions.to_vec();
        order.sort_by(|a, b| self.rows[*a][feature].total_cmp(&self.rows[*b][feature]));
        let n = order.len();
        if n < 2 {
            return 0.0;
        }
        let mut best = 0.0f64;
        match &self.targets {
            Targets::Classes { ids, count } => {
                let mut total = vec![0.0; *count];
                for &p in &order {
                    total[ids[p]] += self.gain_weights[p];
                }
                let w: f64 = total.iter().sum();
                if w <= 0.0 {
                    return 0.0;
                }
                let h = entropy(&total);
                let mut right_counts = vec![0usize; *count];
                for &p in &order {
                    right_counts[ids[p]] += 1;
                }
                let mut left = vec![0.0; *count];
                let mut right = total;
                for i in 0..n - 1 {
                    let p = order[i];
                    let m = self.gain_weights[p];
                    left[ids[p]] += m;
                    right[ids[p]] -= m;
                    right_counts[ids[p]] -= 1;
                    if right_counts[ids[p]] == 0 {
                        right[ids[p]] = 0.0;
                    }
                    if self.rows[order[i + 1]][feature] <= self.rows[p][feature] {
                        continue;
                    }
                    let wl: f64 = left.iter().sum();
                    let wr: f64 = right.iter().sum();
                    let g = h - (wl / w) * entropy(&left) - (wr / w) * entropy(&right);
                    best = best.max(g);
                }
            }
            Targets::Values(v) => {
                let shift = order.iter().map(|p| v[*p]).sum::<f64>() / n as f64;
                let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
                for &p in &order {
                    let y = v[p] - shift;
                    let wi = self.gain_weights[p];
                    w += wi;
                    s1 += wi * y;
                    s2 += wi * y * y;
                }
                if w <= 0.0 {
                    return 0.0;
                }
                let h = weighted_variance(w, s1, s2);
                let (mut lw, mut l1, mut l2) = (0.0, 0.0, 0.0);
                for i in 0..n - 1 {
                    let p = order[i];
                    let y = v[p] - shift;
                    let wi = self.gain_weights[p];
                    lw += wi;
                    l1 += wi * y;
                    l2 += wi * y * y;
                    if self.rows[order[i + 1]][feature] <= self.rows[p][feature] {
                        continue;
                    }
                    let (rw, r1, r2) = (w - lw, s1 - l1, s2 - l2);
                    let g = h - (lw / w) * weighted_variance(lw, l1, l2) - (rw / w) * weighted_variance(rw, r1, r2);
                    best = best.max(g);
                }
            }
        }
        best
    }
}

/// `ceil(sqrt(d))`, computed exactly.
pub fn split_feature_count(dimension: usize) -> usize {
    let mut k = (dimension as f64).sqrt() as usize;
    while k * k < dimension {
        k += 1;
    }
    while k > 1 && (k - 1) * (k - 1) >= dimension {
        k -= 1;
    }
    k.max(1)
}

/// Picks `ceil(sqrt(D))` features for a node: samples
/// `factor * ceil(sqrt(D))` distinct candidates uniformly, ranks them by
/// their best single-threshold reweighted gain and keeps the best. The
/// result is sorted ascending. When `D` does not exceed the target count
/// all features are returned and no randomness is consumed.
pub fn select_split_features<R: Rng + ?Sized>(
    view: &TrainingView<'_>,
    positions: &[usize],
    candidate_factor: usize,
    rng: &mut R,
) -> Vec<usize> {
    let d = view.dimension();
    let keep = split_feature_count(d);
    if d <= keep {
        return (0..d).collect();
    }
    let n_candidates = (candidate_factor.max(1) * keep).min(d);
    let candidates: Vec<usize> =
        if n_candidates == d { (0..d).collect() } else { index::sample(rng, d, n_candidates).into_vec() };
    let mut scored: Vec<(usize, f64)> =
        candidates.into_iter().map(|f| (f, view.best_threshold_gain(positions, f))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = scored.into_iter().take(keep).map(|(f, _)| f).collect();
    chosen.sort_unstable();
    chosen
}

/// How a split was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Learned,
    Median,
}

/// A proposed binary split. A sample goes left iff
/// `model.score(x[features]) < threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitProposal {
    pub features: Vec<usize>,
    pub model: LinearModel,
    pub threshold: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub kind: SplitKind,
}

fn project(rows: &[Vec<f64>], positions: &[usize], features: &[usize]) -> Vec<Vec<f64>> {
    positions.iter().map(|&p| features.iter().map(|&f| rows[p][f]).collect()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn route(sub: &[Vec<f64>], positions: &[usize], model: &LinearModel, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (x, &p) in sub.iter().zip(positions) {
        if model.score(x) < threshold {
            left.push(p);
        } else {
            right.push(p);
        }
    }
    (left, right)
}

/// Two-means on projected rows. Seeds are the most distant pair among
/// random probes; assignment ties go to cluster 0. Returns `None` when a
/// cluster empties.
pub fn two_means<R: Rng + ?Sized>(sub: &[Vec<f64>], rng: &mut R) -> Option<Vec<usize>> {
    let n = sub.len();
    if n < 2 {
        return None;
    }
    let probes: Vec<usize> = (0..TWO_MEANS_PROBES).map(|_| rng.random_range(0..n)).collect();
    let (mut a, mut b, mut best) = (probes[0], probes[0], 0.0);
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            let d = sq_dist(&sub[probes[i]], &sub[probes[j]]);
            if d > best {
                best = d;
                a = probes[i];
                b = probes[j];
            }
        }
    }
    if best == 0.0 {
        for (i, x) in sub.iter().enumerate() {
            let d = sq_dist(&sub[a], x);
            if d > best {
                best = d;
                b = i;
            }
        }
        if best == 0.0 {
            return None;
        }
    }
    let mut centers = [sub[a].clone(), sub[b].clone()];
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..TWO_MEANS_ITERS {
        let mut changed = false;
        for (x, slot) in sub.iter().zip(assignment.iter_mut()) {
            let k = if sq_dist(x, &centers[0]) <= sq_dist(x, &centers[1]) { 0 } else { 1 };
            if *slot != k {
                *slot = k;
                changed = true;
            }
        }
        let mut sums = [vec![0.0; sub[0].len()], vec![0.0; sub[0].len()]];
        let mut counts = [0usize; 2];
        for (x, &k) in sub.iter().zip(&assignment) {
            counts[k] += 1;
            sums[k].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        if counts.contains(&0) {
            return None;
        }
        for k in 0..2 {
            centers[k] = sums[k].iter().map(|s| s / counts[k] as f64).collect();
        }
        if !changed {
            break;
        }
    }
    Some(assignment)
}

/// Learned classification split: 2-means on the node's selected features,
/// then a weighted squared-hinge SVM separating the two clusters with
/// cluster weights `f(p_k)` (unit weights when not cost sensitive).
/// Falls back to the best median split; `None` means the node should be
/// a leaf.
pub fn split_classification_node<R: Rng + ?Sized>(
    view: &TrainingView<'_>,
    positions: &[usize],
    features: &[usize],
    cost: f64,
    cost_sensitive: bool,
    rng: &mut R,
) -> Option<SplitProposal> {
    let sub = project(view.rows, positions, features);
    if sub.iter().all(|x| x == &sub[0]) {
        return None;
    }
    if let Some(assignment) = two_means(&sub, rng) {
        let n = positions.len() as f64;
        let n0 = assignment.iter().filter(|k| **k == 0).count() as f64;
        let props = [n0 / n, (n - n0) / n];
        let cluster_weight = |k: usize| if cost_sensitive { cost_weight(props[k]).unwrap_or(0.0) } else { 1.0 };
        let signs: Vec<f64> = assignment.iter().map(|k| if *k == 0 { 1.0 } else { -1.0 }).collect();
        let weights: Vec<f64> = assignment.iter().map(|k| cluster_weight(*k)).collect();
        if let Ok((model, _)) = fit_weighted_svm(&sub, &signs, &weights, cost) {
            let (left, right) = route(&sub, positions, &model, 0.0);
            if !left.is_empty() && !right.is_empty() {
                return Some(SplitProposal {
                    features: features.to_vec(),
                    model,
                    threshold: 0.0,
                    left,
                    right,
                    kind: SplitKind::Learned,
                });
            }
        }
    }
    median_split(view, positions, features)
}

/// Learned regression split: weighted squared ε-insensitive SVR with
/// per-label-bin weights `f(p_y)`; a sample goes left iff its prediction
/// is below the node's label mean. Falls back to the best median split;
/// `None` means leaf.
pub fn split_regression_node(
    view: &TrainingView<'_>,
    positions: &[usize],
    features: &[usize],
    cost: f64,
    margin: f64,
    bins: usize,
    cost_sensitive: bool,
) -> Result<Option<SplitProposal>> {
    let values = match &view.targets {
        Targets::Values(v) => v,
        Targets::Classes { .. } => return Err(Error::Contract("regression split on class labels".into())),
    };
    let y: Vec<f64> = positions.iter().map(|p| values[*p]).collect();
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || positions.len() < 2 {
        return Ok(None);
    }
    let sub = project(view.rows, positions, features);
    let weights: Vec<f64> = if cost_sensitive {
        let binning = LabelBins::over(&y, bins);
        let hist = binning.histogram(&y);
        let n = y.len() as f64;
        y.iter().map(|v| cost_weight(hist[binning.bin_of(*v)] as f64 / n).unwrap_or(0.0)).collect()
    } else {
        vec![1.0; y.len()]
    };
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if weights.iter().any(|w| *w > 0.0) {
        let (model, _) = fit_weighted_svr(&sub, &y, &weights, cost, margin)?;
        let (left, right) = route(&sub, positions, &model, mean);
        if !left.is_empty() && !right.is_empty() {
            return Ok(Some(SplitProposal {
                features: features.to_vec(),
                model,
                threshold: mean,
                left,
                right,
                kind: SplitKind::Learned,
            }));
        }
    }
    Ok(median_split(view, positions, features))
}

/// Best single-feature split at the lower median (midpoint to the next
/// distinct value, or to the previous one when the median is the
/// maximum), scored by reweighted gain. `None` if every selected feature
/// is constant on the node.
pub fn median_split(view: &TrainingView<'_>, positions: &[usize], features: &[usize]) -> Option<SplitProposal> {
    let mut best: Option<(f64, usize, f64)> = None;
    for (slot, &f) in features.iter().enumerate() {
        let mut vals: Vec<f64> = positions.iter().map(|p| view.rows[*p][f]).collect();
        vals.sort_by(f64::total_cmp);
        let median = vals[(vals.len() - 1) / 2];
        let above = vals.iter().copied().find(|v| *v > median);
        let below = vals.iter().rev().copied().find(|v| *v < median);
        let cut = match (above, below) {
            (Some(a), _) => 0.5 * (median + a),
            (None, Some(b)) => 0.5 * (b + median),
            (None, None) => continue,
        };
        let (left, right): (Vec<usize>, Vec<usize>) = positions.iter().partition(|p| view.rows[**p][f] < cut);
        let gain = view.partition_gain(positions, &left, &right);
        if best.is_none_or(|(g, _, _)| gain > g) {
            best = Some((gain, slot, cut));
        }
    }
    let (_, slot, cut) = best?;
    let mut weights = vec![0.0; features.len()];
    weights[slot] = 1.0;
    let model = LinearModel { weights, bias: -cut };
    let sub = project(view.rows, positions, features);
    let (left, right) = route(&sub, positions, &model, 0.0);
    Some(SplitProposal { features: features.to_vec(), model, threshold: 0.0, left, right, kind: SplitKind::Median })
}
