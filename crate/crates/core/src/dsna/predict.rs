//! The alternating DSNA prediction loop.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::alm::{solve_sparse_approx, sparse_objective, AlmOptions};
use super::cluster::{discriminative_cluster, Cluster};
use super::decode::decode_label;
use super::distance::max_label_gap;
use super::hull::{fit_affine_hull, hull_project};
use super::prior::alpha_prior;
use crate::config::DsnaConfig;
use crate::data::{Dataset, Label, TaskKind};
use crate::error::{ensure, Result};
use crate::forest::{merge_neighborhood, CostSensitiveForest, Neighborhood};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsnaSolution {
    pub label: Label,
    /// Label the outer loop started from.
    pub initial_label: Label,
    /// Index of the chosen cluster among `cluster_count` clusters.
    pub cluster_index: usize,
    pub cluster_count: usize,
    /// Training positions of the chosen cluster, aligned with the
    /// coefficient vectors.
    pub cluster_members: Vec<usize>,
    pub hull_coeffs: Vec<f64>,
    pub hull_residual: f64,
    pub sparse_coeffs: Vec<f64>,
    pub prior: Vec<f64>,
    pub outer_iterations: usize,
    /// The label stopped changing before the iteration cap.
    pub converged: bool,
    /// Every sparse solve met its tolerance.
    pub inner_converged: bool,
    /// Joint objective after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub neighborhood_size: usize,
}

/// DSNA prediction for a raw query: forest neighborhood, label-aware
/// clustering, hull selection and the prior-anchored sparse refinement.
pub fn dsna_predict(forest: &CostSensitiveForest, q: &[f64], config: &DsnaConfig) -> Result<DsnaSolution> {
    let neighborhood = merge_neighborhood(forest, q)?;
    let z = forest.standardize(q)?;
    dsna_predict_in(&forest.train, &neighborhood, &z, config)
}

struct Candidate<'c> {
    index: usize,
    cluster: &'c Cluster,
    hull_point: DVector<f64>,
    v: DVector<f64>,
    residual: f64,
    centroid_distance: f64,
    atoms: DMatrix<f64>,
}

fn augment_vector(x: &DVector<f64>, anchor: f64) -> DVector<f64> {
    if anchor == 0.0 {
        return x.clone();
    }
    x.clone().insert_row(x.len(), anchor)
}

fn augment_atoms(atoms: &DMatrix<f64>, anchor: f64) -> DMatrix<f64> {
    if anchor == 0.0 {
        return atoms.clone();
    }
    atoms.clone().insert_row(atoms.nrows(), anchor)
}

/// DSNA on an explicit neighborhood of `train`, with `q` already in the
/// feature space of `train`.
pub fn dsna_predict_in(
    train: &Dataset,
    neighborhood: &Neighborhood,
    q: &[f64],
    config: &DsnaConfig,
) -> Result<DsnaSolution> {
    config.validate()?;
    ensure!(!neighborhood.is_empty(), Contract, "empty neighborhood");
    ensure!(
        q.len() == train.dimension(),
        Contract,
        "query has dimension {} but training data has {}",
        q.len(),
        train.dimension()
    );
    ensure!(
        neighborhood.indices.iter().all(|p| *p < train.len()),
        Contract,
        "neighborhood refers past the training set"
    );
    let task = train.task();
    let clusters = discriminative_cluster(
        train,
        neighborhood,
        config.cluster_count,
        config.overlap_slack,
        config.tau,
        config.eps_guard,
    )?;
    let qv = DVector::from_column_slice(q);
    let mut projected = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let hull = fit_affine_hull(cluster)?;
        let (v, residual) = hull_project(&qv, &hull)?;
        let centroid_distance = (&qv - &hull.centroid).norm();
        projected.push((hull.point(&v), v, residual, centroid_distance));
    }
    let best_residual = projected.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let candidates: Vec<Candidate> = projected
        .into_iter()
        .enumerate()
        .filter(|(_, p)| p.2 <= best_residual + config.hull_tolerance)
        .map(|(index, (hull_point, v, residual, centroid_distance))| Candidate {
            index,
            cluster: &clusters[index],
            hull_point: augment_vector(&hull_point, config.affine_anchor),
            v,
            residual,
            centroid_distance,
            atoms: augment_atoms(&clusters[index].atoms, config.affine_anchor),
        })
        .collect();
    // Among equally good hulls the one with the nearest centroid seeds
    // the label.
    let first = candidates
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual).then(a.centroid_distance.total_cmp(&b.centroid_distance)))
        .expect("at least one candidate hull");
    let initial_label = first.cluster.consensus();

    let target = augment_vector(&qv, config.affine_anchor);
    let neighborhood_labels: Vec<Label> = neighborhood.indices.iter().map(|p| train.label(*p)).collect();
    let options = AlmOptions { max_iters: config.max_inner_iters, ..AlmOptions::default() };

    let mut label = initial_label;
    let mut trace = Vec::new();
    let mut inner_converged = true;
    let mut converged = false;
    let mut chosen = None;
    for _ in 0..config.max_outer_iters {
        let max_gap = max_label_gap(neighborhood_labels.iter().copied().chain(std::iter::once(label)));
        let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>)> = None;
        for (c, cand) in candidates.iter().enumerate() {
            let prior = alpha_prior(
                q,
                label,
                cand.cluster,
                config.neighbor_radius,
                config.decay,
                config.tau,
                max_gap,
                config.eps_guard,
            )?;
            let solution = solve_sparse_approx(&target, &cand.atoms, &prior, config.lambda, config.gamma, &options)?;
            inner_converged &= solution.converged;
            let objective =
                sparse_objective(&cand.hull_point, &cand.atoms, &prior, config.lambda, config.gamma, &solution.alpha);
            if best.as_ref().is_none_or(|b| objective < b.0) {
                best = Some((objective, c, solution.alpha, prior));
            }
        }
        let (objective, c, alpha, prior) = best.expect("at least one candidate hull");
        let next = decode_label(&alpha, &candidates[c].cluster.labels, task, config.vote_threshold_fraction)?;
        trace.push(objective);
        let settled = match task {
            TaskKind::Classification => next == label,
            TaskKind::Regression => (next.value() - label.value()).abs() < config.label_tol,
        };
        label = next;
        chosen = Some((c, alpha, prior));
        if settled {
            converged = true;
            break;
        }
    }
    let (c, alpha, prior) = chosen.expect("at least one outer iteration");
    let cand = &candidates[c];
    Ok(DsnaSolution {
        label,
        initial_label,
        cluster_index: cand.index,
        cluster_count: clusters.len(),
        cluster_members: cand.cluster.members.clone(),
        hull_coeffs: cand.v.as_slice().to_vec(),
        hull_residual: cand.residual,
        sparse_coeffs: alpha,
        prior,
        outer_iterations: trace.len(),
        converged,
        inner_converged,
        objective_trace: trace,
        neighborhood_size: neighborhood.len(),
    })
}
