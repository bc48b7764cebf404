//! A minimal plain random forest written against the forest's documented
//! behavior: per-tree ChaCha8 streams, bootstrap, `ceil(sqrt(D))` features
//! ranked by unweighted threshold gain, 2-means plus unit-weight SVM
//! splits (SVR splits for regression) with a median fallback, leaves
//! holding distinct in-bag samples, majority or mean aggregation. Only the
//! linear SVM/SVR fits are shared with the library.

use std::collections::BTreeMap;

use dsna_core::solvers::{fit_weighted_svm, fit_weighted_svr, LinearModel};
use dsna_core::{Dataset, ForestConfig, Label, TaskKind};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Node {
    Leaf(Vec<usize>),
    Split { features: Vec<usize>, model: LinearModel, threshold: f64, left: Box<Node>, right: Box<Node> },
}

pub struct ReferenceForest {
    mean: Vec<f64>,
    scale: Vec<f64>,
    labels: Vec<Label>,
    task: TaskKind,
    trees: Vec<Node>,
}

struct Ctx<'a> {
    rows: &'a [Vec<f64>],
    /// Dense ascending class ids, or labels.
    y: Vec<f64>,
    classes: usize,
    task: TaskKind,
    config: &'a ForestConfig,
}

fn entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &c in counts {
        if c > 0.0 {
            let p = c / total;
            h -= p * p.ln();
        }
    }
    h
}

fn variance(ys: &[f64], shift: f64) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let n = ys.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for y in ys {
        let v = y - shift;
        s1 += v;
        s2 += v * v;
    }
    let m = s1 / n;
    (s2 / n - m * m).max(0.0)
}

impl Ctx<'_> {
    fn counts(&self, set: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.classes];
        for &p in set {
            c[self.y[p] as usize] += 1.0;
        }
        c
    }

    fn gain(&self, parent: &[usize], left: &[usize], right: &[usize]) -> f64 {
        let n = parent.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let (nl, nr) = (left.len() as f64, right.len() as f64);
        match self.task {
            TaskKind::Classification => {
                entropy(&self.counts(parent))
                    - (nl / n) * entropy(&self.counts(left))
                    - (nr / n) * entropy(&self.counts(right))
            }
            TaskKind::Regression => {
                let shift = parent.iter().map(|p| self.y[*p]).sum::<f64>() / n;
                let ys = |s: &[usize]| s.iter().map(|p| self.y[*p]).collect::<Vec<f64>>();
                variance(&ys(parent), shift)
                    - (nl / n) * variance(&ys(left), shift)
                    - (nr / n) * variance(&ys(right), shift)
            }
        }
    }

    fn best_threshold_gain(&self, positions: &[usize], f: usize) -> f64 {
        let mut order = positions.to_vec();
        order.sort_by(|a, b| self.rows[*a][f].total_cmp(&self.rows[*b][f]));
        let mut best = 0.0f64;
        for i in 0..order.len().saturating_sub(1) {
            if self.rows[order[i + 1]][f] <= self.rows[order[i]][f] {
                continue;
            }
            best = best.max(self.gain(&order, &order[..=i], &order[i + 1..]));
        }
        best
    }

    fn pure(&self, positions: &[usize]) -> bool {
        positions.iter().all(|p| self.y[*p] == self.y[positions[0]])
    }

    fn grow(&self, positions: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> Node {
        let leaf = |positions: &[usize]| {
            let mut s = positions.to_vec();
            s.sort_unstable();
            s.dedup();
            Node::Leaf(s)
        };
        if depth >= self.config.max_depth || positions.len() < self.config.min_node_size || self.pure(&positions) {
            return leaf(&positions);
        }
        let d = self.rows[0].len();
        let mut keep = 1;
        while keep * keep < d {
            keep += 1;
        }
        let features: Vec<usize> = if d <= keep {
            (0..d).collect()
        } else {
            let n_candidates = (self.config.candidate_feature_factor * keep).min(d);
            let candidates: Vec<usize> =
                if n_candidates == d { (0..d).collect() } else { index::sample(rng, d, n_candidates).into_vec() };
            let mut scored: Vec<(usize, f64)> =
                candidates.into_iter().map(|f| (f, self.best_threshold_gain(&positions, f))).collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut chosen: Vec<usize> = scored.into_iter().take(keep).map(|(f, _)| f).collect();
            chosen.sort_unstable();
            chosen
        };
        let sub: Vec<Vec<f64>> =
            positions.iter().map(|&p| features.iter().map(|&f| self.rows[p][f]).collect()).collect();
        let Some((model, threshold)) = self.split_model(&positions, &sub, &features, rng) else {
            return leaf(&positions);
        };
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (x, &p) in sub.iter().zip(&positions) {
            if model.score(x) < threshold {
                left.push(p);
            } else {
                right.push(p);
            }
        }
        if self.gain(&positions, &left, &right) < self.config.min_gain {
            return leaf(&positions);
        }
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        Node::Split { features, model, threshold, left: Box::new(l), right: Box::new(r) }
    }

    fn split_model(
        &self,
        positions: &[usize],
        sub: &[Vec<f64>],
        features: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<(LinearModel, f64)> {
        let sides = |model: &LinearModel, t: f64| {
            let left = sub.iter().filter(|x| model.score(x) < t).count();
            left > 0 && left < sub.len()
        };
        match self.task {
            TaskKind::Classification => {
                if sub.iter().all(|x| x == &sub[0]) {
                    return None;
                }
                if let Some(assign) = two_means(sub, rng) {
                    let signs: Vec<f64> = assign.iter().map(|k| if *k == 0 { 1.0 } else { -1.0 }).collect();
                    if let Ok((model, _)) = fit_weighted_svm(sub, &signs, &vec![1.0; sub.len()], self.config.svm_cost) {
                        if sides(&model, 0.0) {
                            return Some((model, 0.0));
                        }
                    }
                }
            }
            TaskKind::Regression => {
                let y: Vec<f64> = positions.iter().map(|p| self.y[*p]).collect();
                if y.iter().all(|v| *v == y[0]) {
                    return None;
                }
                let mean = y.iter().sum::<f64>() / y.len() as f64;
                let (model, _) =
                    fit_weighted_svr(sub, &y, &vec![1.0; y.len()], self.config.svm_cost, self.config.svr_margin)
                        .ok()?;
                if sides(&model, mean) {
                    return Some((model, mean));
                }
            }
        }
        self.median(positions, features)
    }

    fn median(&self, positions: &[usize], features: &[usize]) -> Option<(LinearModel, f64)> {
        let mut best: Option<(f64, usize, f64)> = None;
        for (slot, &f) in features.iter().enumerate() {
            let mut vals: Vec<f64> = positions.iter().map(|p| self.rows[*p][f]).collect();
            vals.sort_by(f64::total_cmp);
            let m = vals[(vals.len() - 1) / 2];
            let cut = match (vals.iter().find(|v| **v > m), vals.iter().rev().find(|v| **v < m)) {
                (Some(a), _) => 0.5 * (m + a),
                (None, Some(b)) => 0.5 * (b + m),
                (None, None) => continue,
            };
            let (l, r): (Vec<usize>, Vec<usize>) = positions.iter().partition(|p| self.rows[**p][f] < cut);
            let g = self.gain(positions, &l, &r);
            if best.is_none_or(|(bg, _, _)| g > bg) {
                best = Some((g, slot, cut));
            }
        }
        let (_, slot, cut) = best?;
        let mut weights = vec![0.0; features.len()];
        weights[slot] = 1.0;
        Some((LinearModel { weights, bias: -cut }, 0.0))
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// 2-means seeded by the farthest pair among 16 random probes (or, if
/// they coincide, the farthest point from the first probe), 20 Lloyd
/// rounds, ties to cluster 0, `None` if a cluster empties.
fn two_means(sub: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let n = sub.len();
    let probes: Vec<usize> = (0..16).map(|_| rng.random_range(0..n)).collect();
    let (mut a, mut b, mut far) = (probes[0], probes[0], 0.0);
    for i in 0..16 {
        for j in i + 1..16 {
            let d = sq(&sub[probes[i]], &sub[probes[j]]);
            if d > far {
                (a, b, far) = (probes[i], probes[j], d);
            }
        }
    }
    if far == 0.0 {
        for i in 0..n {
            let d = sq(&sub[a], &sub[i]);
            if d > far {
                (b, far) = (i, d);
            }
        }
        if far == 0.0 {
            return None;
        }
    }
    let mut centers = [sub[a].clone(), sub[b].clone()];
    let mut assign = vec![usize::MAX; n];
    for _ in 0..20 {
        let mut changed = false;
        for i in 0..n {
            let k = usize::from(sq(&sub[i], &centers[0]) > sq(&sub[i], &centers[1]));
            changed |= assign[i] != k;
            assign[i] = k;
        }
        for k in 0..2 {
            let members: Vec<&Vec<f64>> = (0..n).filter(|i| assign[*i] == k).map(|i| &sub[i]).collect();
            if members.is_empty() {
                return None;
            }
            let mut c = vec![0.0; sub[0].len()];
            for m in &members {
                c.iter_mut().zip(m.iter()).for_each(|(s, v)| *s += v);
            }
            centers[k] = c.iter().map(|s| s / members.len() as f64).collect();
        }
        if !changed {
            break;
        }
    }
    Some(assign)
}

fn majority(labels: impl Iterator<Item = u32>) -> u32 {
    let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
    for l in labels {
        *votes.entry(l).or_default() += 1;
    }
    let top = *votes.values().max().unwrap();
    *votes.iter().find(|(_, n)| **n == top).unwrap().0
}

impl ReferenceForest {
    pub fn fit(data: &Dataset, config: &ForestConfig) -> ReferenceForest {
        let n = data.len();
        let d = data.dimension();
        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for j in 0..d {
            let col: Vec<f64> = (0..n).map(|i| data.features(i)[j]).collect();
            let m = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64).sqrt();
            mean[j] = m;
            scale[j] = if sd <= 1e-12 * m.abs().max(1.0) { 0.0 } else { sd };
        }
        let std = |x: &[f64]| -> Vec<f64> {
            (0..d).map(|j| if scale[j] == 0.0 { 0.0 } else { (x[j] - mean[j]) / scale[j] }).collect()
        };
        let rows: Vec<Vec<f64>> = (0..n).map(|i| std(data.features(i))).collect();
        let labels = data.labels();
        let classes = data.classes();
        let y: Vec<f64> = labels
            .iter()
            .map(|l| match l {
                Label::Class(c) => classes.binary_search(c).unwrap() as f64,
                Label::Numeric(v) => *v,
            })
            .collect();
        let ctx = Ctx { rows: &rows, y, classes: classes.len(), task: data.task(), config };
        let trees = (0..config.tree_count)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(t as u64);
                let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                ctx.grow(bootstrap, 0, &mut rng)
            })
            .collect();
        ReferenceForest { mean, scale, labels, task: data.task(), trees }
    }

    pub fn predict(&self, q: &[f64]) -> Label {
        let z: Vec<f64> = (0..q.len())
            .map(|j| if self.scale[j] == 0.0 { 0.0 } else { (q[j] - self.mean[j]) / self.scale[j] })
            .collect();
        let leaves: Vec<&Vec<usize>> = self
            .trees
            .iter()
            .map(|t| {
                let mut node = t;
                loop {
                    match node {
                        Node::Leaf(s) => break s,
                        Node::Split { features, model, threshold, left, right } => {
                            let x: Vec<f64> = features.iter().map(|f| z[*f]).collect();
                            node = if model.score(&x) < *threshold { left } else { right };
                        }
                    }
                }
            })
            .collect();
        match self.task {
            TaskKind::Classification => Label::Class(majority(
                leaves.iter().map(|leaf| majority(leaf.iter().map(|p| self.labels[*p].class().unwrap()))),
            )),
            TaskKind::Regression => {
                let means: Vec<f64> = leaves
                    .iter()
                    .map(|leaf| leaf.iter().map(|p| self.labels[*p].value()).sum::<f64>() / leaf.len() as f64)
                    .collect();
                Label::Numeric(means.iter().sum::<f64>() / means.len() as f64)
            }
        }
    }
}
