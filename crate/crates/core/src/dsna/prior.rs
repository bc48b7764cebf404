//! Exponentially weighted coefficient prior over the query's nearest
//! same-label cluster members.

use super::cluster::Cluster;
use super::distance::{euclidean, label_aware_distance};
use crate::config::NeighborRadius;
use crate::data::Label;
use crate::error::{ensure, Result};

/// Prior coefficients for `cluster`: members whose label-aware distance to
/// `q` (labeled `query_label`) is within the radius get weight
/// `exp(-d / decay)`, normalized to sum to one; the rest get zero. If no
/// member qualifies the prior is uniform over the nearest quarter of the
/// members.
#[allow(clippy::too_many_arguments)]
pub fn alpha_prior(
    q: &[f64],
    query_label: Label,
    cluster: &Cluster,
    radius: NeighborRadius,
    decay: f64,
    tau: f64,
    max_gap: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    ensure!(!cluster.is_empty(), Contract, "prior needs a nonempty cluster");
    ensure!(decay > 0.0, Contract, "decay must be > 0");
    ensure!(q.len() == cluster.atoms.nrows(), Contract, "query dimension does not match the cluster");
    let m = cluster.len();
    let columns: Vec<&[f64]> = (0..m)
        .map(|j| {
            let start = j * cluster.atoms.nrows();
            &cluster.atoms.as_slice()[start..start + cluster.atoms.nrows()]
        })
        .collect();
    let dist: Vec<f64> = (0..m)
        .map(|j| label_aware_distance(columns[j], q, cluster.labels[j], query_label, tau, max_gap, eps))
        .collect();
    let eps_k = match radius {
        NeighborRadius::Fixed(r) => r,
        NeighborRadius::Adaptive => median(&dist),
    };
    let inside: Vec<usize> = (0..m).filter(|&j| dist[j] <= eps_k).collect();
    let mut prior = vec![0.0; m];
    if inside.is_empty() {
        let mut order: Vec<usize> = (0..m).collect();
        let euclid: Vec<f64> = columns.iter().map(|c| euclidean(c, q)).collect();
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(euclid[a].total_cmp(&euclid[b])).then(a.cmp(&b)));
        let take = m.div_ceil(4);
        for &j in &order[..take] {
            prior[j] = 1.0 / take as f64;
        }
        return Ok(prior);
    }
    let nearest = inside.iter().map(|&j| dist[j]).fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for &j in &inside {
        let w = (-(dist[j] - nearest) / decay).exp();
        prior[j] = w;
        total += w;
    }
    for p in &mut prior {
        *p /= total;
    }
    Ok(prior)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
