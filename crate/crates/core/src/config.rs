//! Hyperparameters for the forest and for DSNA prediction.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub tree_count: usize,
    pub max_depth: usize,
    pub min_node_size: usize,
    /// Splits whose reweighted gain falls below this become leaves.
    pub min_gain: f64,
    /// Regularization trade-off `C` of the node SVM/SVR.
    pub svm_cost: f64,
    /// Insensitive-zone half width of the node SVR.
    pub svr_margin: f64,
    /// Equal-width label bins used for regression cost weights.
    pub regression_cost_bins: usize,
    /// Candidates examined per node, as a multiple of `ceil(sqrt(D))`.
    pub candidate_feature_factor: usize,
    pub seed: u64,
    /// When false the forest is a plain random forest: unit costs and
    /// unweighted gain.
    pub cost_sensitive: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            tree_count: 20,
            max_depth: 10,
            min_node_size: 5,
            min_gain: 1e-7,
            svm_cost: 1.0,
            svr_margin: 0.1,
            regression_cost_bins: 10,
            candidate_feature_factor: 2,
            seed: 0,
            cost_sensitive: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.tree_count >= 1, Config, "tree_count must be >= 1");
        ensure!(self.max_depth >= 1, Config, "max_depth must be >= 1");
        ensure!(self.min_node_size >= 2, Config, "min_node_size must be >= 2");
        ensure!(self.min_gain >= 0.0 && self.min_gain.is_finite(), Config, "min_gain must be finite and >= 0");
        ensure!(self.svm_cost > 0.0 && self.svm_cost.is_finite(), Config, "svm_cost must be > 0");
        ensure!(self.svr_margin >= 0.0 && self.svr_margin.is_finite(), Config, "svr_margin must be >= 0");
        ensure!(self.regression_cost_bins >= 1, Config, "regression_cost_bins must be >= 1");
        ensure!(self.candidate_feature_factor >= 1, Config, "candidate_feature_factor must be >= 1");
        Ok(())
    }

    /// The same configuration with cost sensitivity switched off.
    pub fn plain(&self) -> ForestConfig {
        ForestConfig { cost_sensitive: false, ..self.clone() }
    }
}

/// Radius of the α-prior neighbor set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborRadius {
    /// Median label-aware distance of the cluster members to the query.
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsnaConfig {
    pub cluster_count: usize,
    /// A point joins every cluster within this multiple of its nearest
    /// centroid distance.
    pub overlap_slack: f64,
    /// Weight of the sparsity penalty.
    pub lambda: f64,
    /// Weight of the penalty pulling coefficients to the prior.
    pub gamma: f64,
    /// Trade-off of the regression label-gap function.
    pub tau: f64,
    /// Decay of the prior's exponential weights.
    pub decay: f64,
    pub neighbor_radius: NeighborRadius,
    /// Hulls whose residual is within this of the best are compared by the
    /// full objective.
    pub hull_tolerance: f64,
    pub vote_threshold_fraction: f64,
    pub max_outer_iters: usize,
    pub label_tol: f64,
    pub eps_guard: f64,
    pub max_inner_iters: usize,
    /// Value of the constant coordinate appended to the query and to every
    /// atom before sparse coding; it softly enforces affine (sum-to-one)
    /// coefficients. Zero disables it.
    pub affine_anchor: f64,
}

impl Default for DsnaConfig {
    fn default() -> Self {
        DsnaConfig {
            cluster_count: 2,
            overlap_slack: 1.1,
            lambda: 1e-3,
            gamma: 1e-3,
            tau: 1.0,
            decay: 1.0,
            neighbor_radius: NeighborRadius::Adaptive,
            hull_tolerance: 1e-6,
            vote_threshold_fraction: 0.1,
            max_outer_iters: 50,
            label_tol: 1e-3,
            eps_guard: 1e-8,
            max_inner_iters: 20_000,
            affine_anchor: 1.0,
        }
    }
}

impl DsnaConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!((2..=4).contains(&self.cluster_count), Config, "cluster_count must be in [2, 4]");
        ensure!(self.overlap_slack >= 1.0 && self.overlap_slack.is_finite(), Config, "overlap_slack must be >= 1");
        ensure!(self.lambda >= 0.0 && self.lambda.is_finite(), Config, "lambda must be >= 0");
        ensure!(self.gamma >= 0.0 && self.gamma.is_finite(), Config, "gamma must be >= 0");
        ensure!(self.tau > 0.0 && self.tau.is_finite(), Config, "tau must be > 0");
        ensure!(self.decay > 0.0 && self.decay.is_finite(), Config, "decay must be > 0");
        if let NeighborRadius::Fixed(r) = self.neighbor_radius {
            ensure!(r > 0.0 && r.is_finite(), Config, "fixed neighbor radius must be > 0");
        }
        ensure!(self.hull_tolerance >= 0.0, Config, "hull_tolerance must be >= 0");
        ensure!(
            self.vote_threshold_fraction > 0.0 && self.vote_threshold_fraction <= 1.0,
            Config,
            "vote_threshold_fraction must be in (0, 1]"
        );
        ensure!(self.max_outer_iters >= 1, Config, "max_outer_iters must be >= 1");
        ensure!(self.label_tol > 0.0, Config, "label_tol must be > 0");
        ensure!(self.eps_guard > 0.0, Config, "eps_guard must be > 0");
        ensure!(self.max_inner_iters >= 1, Config, "max_inner_iters must be >= 1");
        ensure!(self.affine_anchor >= 0.0 && self.affine_anchor.is_finite(), Config, "affine_anchor must be >= 0");
        Ok(())
    }
}
