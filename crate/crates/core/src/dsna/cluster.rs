//! Label-aware K-means with overlapping assignment.

use nalgebra::DMatrix;

use super::distance::{euclidean, label_aware_distance, max_label_gap};
use crate::data::{Dataset, Label, TaskKind};
use crate::error::{ensure, Result};
use crate::forest::Neighborhood;

/// Lloyd iteration cap for neighborhood clustering.
pub const CLUSTER_ITERS: usize = 50;

/// A set of training samples with its feature matrix (one column per
/// member) and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Training positions, ascending.
    pub members: Vec<usize>,
    pub atoms: DMatrix<f64>,
    pub labels: Vec<Label>,
}

impl Cluster {
    pub fn from_members(train: &Dataset, members: Vec<usize>) -> Cluster {
        let d = train.dimension();
        let atoms = DMatrix::from_fn(d, members.len(), |r, c| train.features(members[c])[r]);
        let labels = members.iter().map(|p| train.label(*p)).collect();
        Cluster { members, atoms, labels }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Majority class or mean label of the members.
    pub fn consensus(&self) -> Label {
        consensus(&self.labels)
    }
}

pub(crate) fn consensus(labels: &[Label]) -> Label {
    match labels[0].task() {
        TaskKind::Classification => {
            Label::Class(crate::forest::majority_class(labels.iter().copied()).expect("nonempty labels"))
        }
        TaskKind::Regression => Label::Numeric(labels.iter().map(Label::value).sum::<f64>() / labels.len() as f64),
    }
}

struct Centroid {
    mean: Vec<f64>,
    label: Label,
}

/// Primary and secondary (Euclidean) cost of a point against a centroid.
type Cost = (f64, f64);

/// Clusters joined by a point with the given per-centroid costs. A point
/// joins every cluster whose primary cost is within `slack` times the
/// smallest one. When the smallest primary cost is zero (same-label
/// centroids) the choice among the zero-cost clusters is made on the
/// Euclidean cost with the same slack.
pub(crate) fn overlap_members(costs: &[Cost], slack: f64) -> Vec<usize> {
    let min_primary = costs.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    if min_primary > 0.0 {
        return (0..costs.len()).filter(|&k| costs[k].0 <= slack * min_primary).collect();
    }
    let zero: Vec<usize> = (0..costs.len()).filter(|&k| costs[k].0 == 0.0).collect();
    let min_e = zero.iter().map(|&k| costs[k].1).fold(f64::INFINITY, f64::min);
    zero.into_iter().filter(|&k| costs[k].1 <= slack * min_e).collect()
}

fn argmin(costs: &[Cost]) -> usize {
    let mut best = 0;
    for k in 1..costs.len() {
        if costs[k].0 < costs[best].0 || (costs[k].0 == costs[best].0 && costs[k].1 < costs[best].1) {
            best = k;
        }
    }
    best
}

fn centroid_of(train: &Dataset, members: &[usize]) -> Centroid {
    let d = train.dimension();
    let mut mean = vec![0.0; d];
    for p in members {
        for (m, x) in mean.iter_mut().zip(train.features(*p)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= members.len() as f64;
    }
    let labels: Vec<Label> = members.iter().map(|p| train.label(*p)).collect();
    Centroid { mean, label: consensus(&labels) }
}

/// Lloyd iterations from a deterministic farthest-point seeding. Seeds
/// start at the point nearest the neighborhood mean and then repeatedly
/// take the point with the largest cost to its nearest seed; ties go to
/// the lower training position.
fn kmeans(
    train: &Dataset,
    points: &[usize],
    k: usize,
    cost: &dyn Fn(&[f64], Label, &Centroid) -> Cost,
    slack: Option<f64>,
) -> Vec<Vec<usize>> {
    let center = centroid_of(train, points);
    let first = *points
        .iter()
        .min_by(|a, b| {
            euclidean(train.features(**a), &center.mean).total_cmp(&euclidean(train.features(**b), &center.mean))
        })
        .expect("nonempty");
    let seed_of = |p: usize| Centroid { mean: train.features(p).to_vec(), label: train.label(p) };
    let mut centroids = vec![seed_of(first)];
    while centroids.len() < k {
        let mut pick: Option<(usize, Cost)> = None;
        for &p in points {
            let nearest = centroids
                .iter()
                .map(|c| cost(train.features(p), train.label(p), c))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
                .expect("at least one centroid");
            let better = match pick {
                None => true,
                Some((_, b)) => nearest.0 > b.0 || (nearest.0 == b.0 && nearest.1 > b.1),
            };
            if better {
                pick = Some((p, nearest));
            }
        }
        match pick {
            Some((p, c)) if c.1 > 0.0 => centroids.push(seed_of(p)),
            _ => break,
        }
    }

    let mut previous: Vec<Vec<usize>> = Vec::new();
    for _ in 0..CLUSTER_ITERS {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); centroids.len()];
        for &p in points {
            let costs: Vec<Cost> = centroids.iter().map(|c| cost(train.features(p), train.label(p), c)).collect();
            match slack {
                Some(s) => {
                    for j in overlap_members(&costs, s) {
                        groups[j].push(p);
                    }
                }
                None => groups[argmin(&costs)].push(p),
            }
        }
        groups.retain(|g| !g.is_empty());
        if groups == previous {
            break;
        }
        centroids = groups.iter().map(|g| centroid_of(train, g)).collect();
        previous = groups;
    }
    previous
}

/// Splits a neighborhood into at most `k` overlapping clusters using the
/// label-aware distance between each point and each centroid's consensus
/// label. A point joins every cluster within `overlap_slack` times its
/// smallest centroid distance. Neighborhoods whose labels are all equal
/// fall back to Euclidean distance; neighborhoods smaller than `k` form a
/// single cluster.
pub fn discriminative_cluster(
    train: &Dataset,
    neighborhood: &Neighborhood,
    k: usize,
    overlap_slack: f64,
    tau: f64,
    eps: f64,
) -> Result<Vec<Cluster>> {
    ensure!(!neighborhood.is_empty(), Contract, "cannot cluster an empty neighborhood");
    ensure!(k >= 1, Contract, "cluster count must be >= 1");
    ensure!(overlap_slack >= 1.0, Contract, "overlap slack must be >= 1");
    let points = &neighborhood.indices;
    if points.len() < k {
        return Ok(vec![Cluster::from_members(train, points.clone())]);
    }
    let max_gap = max_label_gap(points.iter().map(|p| train.label(*p)));
    let groups = if max_gap == 0.0 {
        let cost = |x: &[f64], _: Label, c: &Centroid| {
            let e = euclidean(x, &c.mean);
            (e, e)
        };
        kmeans(train, points, k, &cost, Some(overlap_slack))
    } else {
        let cost = |x: &[f64], y: Label, c: &Centroid| {
            (label_aware_distance(x, &c.mean, y, c.label, tau, max_gap, eps), euclidean(x, &c.mean))
        };
        kmeans(train, points, k, &cost, Some(overlap_slack))
    };
    Ok(groups.into_iter().map(|g| Cluster::from_members(train, g)).collect())
}

/// Plain Euclidean K-means without overlap; each point joins exactly one
/// cluster.
pub fn euclidean_cluster(train: &Dataset, neighborhood: &Neighborhood, k: usize) -> Result<Vec<Cluster>> {
    ensure!(!neighborhood.is_empty(), Contract, "cannot cluster an empty neighborhood");
    ensure!(k >= 1, Contract, "cluster count must be >= 1");
    let points = &neighborhood.indices;
    if points.len() < k {
        return Ok(vec![Cluster::from_members(train, points.clone())]);
    }
    let cost = |x: &[f64], _: Label, c: &Centroid| {
        let e = euclidean(x, &c.mean);
        (e, e)
    };
    Ok(kmeans(train, points, k, &cost, None).into_iter().map(|g| Cluster::from_members(train, g)).collect())
}
