//! Cost-sensitive random decision forest (CS-RF).
//!
//! Trees are grown on bootstrap samples. Internal nodes hold a linear
//! split model over a random subset of features, learned by a weighted
//! SVM (classification) or SVR (regression). Leaves keep the training
//! positions that reached them, so a query's leaves can be merged into a
//! local neighborhood for DSNA.

mod gain;
mod split;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ForestConfig;
use crate::data::{Dataset, Label, Scaler, TaskKind};
use crate::error::{ensure, Result};
use crate::solvers::LinearModel;

pub use gain::{reweighted_information_gain, GainWeights};
pub use split::{
    median_split, select_split_features, split_classification_node, split_feature_count, split_regression_node,
    two_means, SplitKind, SplitProposal, TrainingView, TWO_MEANS_ITERS, TWO_MEANS_PROBES,
};

/// Version tag of the in-memory tree layout, bumped on any change that
/// affects serialized models.
pub const FOREST_FORMAT_VERSION: u32 = 1;

/// A node in a tree arena. Children are arena indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Routes left iff `split.score(x[features]) < threshold`. The
    /// threshold is 0 for classification and the node's training label
    /// mean for regression.
    Internal { features: Vec<usize>, split: LinearModel, threshold: f64, left: usize, right: usize },
    /// Sorted, distinct training positions stored at the leaf.
    Leaf { samples: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node arena; the root is node 0.
    pub nodes: Vec<TreeNode>,
    /// The bootstrap multiset of training positions, in draw order.
    pub bootstrap: Vec<usize>,
}

impl DecisionTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Maximum root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[usize]> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { samples } => Some(samples.as_slice()),
            TreeNode::Internal { .. } => None,
        })
    }

    /// The leaf sample set reached by a standardized query.
    pub fn leaf_for(&self, q: &[f64]) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { samples } => return samples,
                TreeNode::Internal { features, split, threshold, left, right } => {
                    let score = split.weights.iter().zip(features).map(|(w, f)| w * q[*f]).sum::<f64>() + split.bias;
                    at = if score < *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A trained forest together with the standardized training set its
/// leaves index into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSensitiveForest {
    pub version: u32,
    pub task: TaskKind,
    pub config: ForestConfig,
    pub scaler: Scaler,
    /// Standardized training data; leaf entries are positions in it.
    pub train: Dataset,
    pub trees: Vec<DecisionTree>,
}

impl CostSensitiveForest {
    pub fn dimension(&self) -> usize {
        self.train.dimension()
    }

    /// Maps a raw query into the forest's standardized feature space.
    pub fn standardize(&self, q: &[f64]) -> Result<Vec<f64>> {
        ensure!(
            q.len() == self.dimension(),
            Contract,
            "query has dimension {} but the forest expects {}",
            q.len(),
            self.dimension()
        );
        ensure!(q.iter().all(|v| v.is_finite()), Contract, "query has non-finite features");
        Ok(self.scaler.transform(q))
    }
}

/// The union of the training positions stored at every leaf a query
/// reaches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighborhood {
    /// Sorted, distinct training positions.
    pub indices: Vec<usize>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.indices.binary_search(&position).is_ok()
    }
}

/// Random stream for tree `t`: the master seed selects the key, the tree
/// index selects the stream, so trees are independent of build order.
pub fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// Trains a forest on `train`. Features are standardized first; the
/// scaler and the standardized data are kept in the forest.
pub fn train_forest(train: &Dataset, config: &ForestConfig) -> Result<CostSensitiveForest> {
    config.validate()?;
    ensure!(
        train.len() >= config.min_node_size,
        Contract,
        "training set has {} samples, fewer than min_node_size {}",
        train.len(),
        config.min_node_size
    );
    let scaler = Scaler::fit(train);
    let data = scaler.transform_dataset(train)?;
    let rows: Vec<Vec<f64>> = data.samples().iter().map(|s| s.features.clone()).collect();
    let labels = data.labels();

    let trees = (0..config.tree_count)
        .into_par_iter()
        .map(|t| grow_tree(&rows, &labels, data.task(), config, &mut tree_rng(config.seed, t)))
        .collect::<Result<Vec<_>>>()?;

    Ok(CostSensitiveForest {
        version: FOREST_FORMAT_VERSION,
        task: data.task(),
        config: config.clone(),
        scaler,
        train: data,
        trees,
    })
}

/// Gain weights for one tree, from its bootstrap sample.
fn tree_gain_weights(labels: &[Label], bootstrap: &[usize], task: TaskKind, config: &ForestConfig) -> GainWeights {
    if !config.cost_sensitive {
        return GainWeights::Uniform;
    }
    match task {
        TaskKind::Classification => {
            let ids: Vec<u32> = bootstrap.iter().filter_map(|p| labels[*p].class()).collect();
            GainWeights::inverse_class_frequency(&ids)
        }
        TaskKind::Regression => {
            let values: Vec<f64> = bootstrap.iter().map(|p| labels[*p].value()).collect();
            GainWeights::inverse_bin_frequency(&values, config.regression_cost_bins)
        }
    }
}

fn grow_tree<R: Rng>(
    rows: &[Vec<f64>],
    labels: &[Label],
    task: TaskKind,
    config: &ForestConfig,
    rng: &mut R,
) -> Result<DecisionTree> {
    let n = rows.len();
    let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let weights = tree_gain_weights(labels, &bootstrap, task, config);
    let view = TrainingView::new(rows, labels, &weights);
    let mut builder = TreeBuilder { view: &view, task, config, nodes: Vec::new() };
    builder.grow(bootstrap.clone(), 0, rng)?;
    Ok(DecisionTree { nodes: builder.nodes, bootstrap })
}

struct TreeBuilder<'a, 'v> {
    view: &'a TrainingView<'v>,
    task: TaskKind,
    config: &'a ForestConfig,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_, '_> {
    fn leaf(&mut self, positions: &[usize]) -> usize {
        let samples: BTreeSet<usize> = positions.iter().copied().collect();
        self.nodes.push(TreeNode::Leaf { samples: samples.into_iter().collect() });
        self.nodes.len() - 1
    }

    fn grow<R: Rng>(&mut self, positions: Vec<usize>, depth: usize, rng: &mut R) -> Result<usize> {
        if depth >= self.config.max_depth
            || positions.len() < self.config.min_node_size
            || self.view.is_pure(&positions)
        {
            return Ok(self.leaf(&positions));
        }
        let features = select_split_features(self.view, &positions, self.config.candidate_feature_factor, rng);
        let proposal = match self.task {
            TaskKind::Classification => split_classification_node(
                self.view,
                &positions,
                &features,
                self.config.svm_cost,
                self.config.cost_sensitive,
                rng,
            ),
            TaskKind::Regression => split_regression_node(
                self.view,
                &positions,
                &features,
                self.config.svm_cost,
                self.config.svr_margin,
                self.config.regression_cost_bins,
                self.config.cost_sensitive,
            )?,
        };
        let Some(split) = proposal else {
            return Ok(self.leaf(&positions));
        };
        if self.view.partition_gain(&positions, &split.left, &split.right) < self.config.min_gain {
            return Ok(self.leaf(&positions));
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { samples: Vec::new() });
        let SplitProposal { features, model, threshold, left, right, .. } = split;
        let left = self.grow(left, depth + 1, rng)?;
        let right = self.grow(right, depth + 1, rng)?;
        self.nodes[id] = TreeNode::Internal { features, split: model, threshold, left, right };
        Ok(id)
    }
}

/// Leaf sample positions reached by a standardized query.
pub fn traverse<'t>(tree: &'t DecisionTree, q: &[f64]) -> Result<&'t [usize]> {
    let expected = tree
        .nodes
        .iter()
        .filter_map(|n| match n {
            TreeNode::Internal { features, .. } => features.iter().max().map(|m| m + 1),
            TreeNode::Leaf { .. } => None,
        })
        .max()
        .unwrap_or(0);
    ensure!(
        q.len() >= expected,
        Contract,
        "query has dimension {} but the tree uses feature {}",
        q.len(),
        expected - 1
    );
    Ok(tree.leaf_for(q))
}

/// Sorted set union of leaf sample sets.
pub fn merge_leaf_sets<'a>(sets: impl IntoIterator<Item = &'a [usize]>) -> Neighborhood {
    let union: BTreeSet<usize> = sets.into_iter().flatten().copied().collect();
    Neighborhood { indices: union.into_iter().collect() }
}

/// Merges the leaves reached by a raw query across all trees.
pub fn merge_neighborhood(forest: &CostSensitiveForest, q: &[f64]) -> Result<Neighborhood> {
    let z = forest.standardize(q)?;
    Ok(merge_neighborhood_standardized(forest, &z))
}

pub(crate) fn merge_neighborhood_standardized(forest: &CostSensitiveForest, z: &[f64]) -> Neighborhood {
    merge_leaf_sets(forest.trees.iter().map(|t| t.leaf_for(z)))
}

/// Majority class of a set of labels, ties to the smallest id.
pub(crate) fn majority_class(labels: impl IntoIterator<Item = Label>) -> Option<u32> {
    let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
    for l in labels {
        if let Some(c) = l.class() {
            *votes.entry(c).or_default() += 1;
        }
    }
    let mut best: Option<(u32, usize)> = None;
    for (c, n) in votes {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((c, n));
        }
    }
    best.map(|(c, _)| c)
}

/// Standard random-forest prediction: per-tree leaf majority (or leaf
/// mean), aggregated by majority vote (or mean) across trees.
pub fn baseline_predict(forest: &CostSensitiveForest, q: &[f64]) -> Result<Label> {
    let z = forest.standardize(q)?;
    Ok(baseline_predict_standardized(forest, &z))
}

pub(crate) fn baseline_predict_standardized(forest: &CostSensitiveForest, z: &[f64]) -> Label {
    let leaves = forest.trees.iter().map(|t| t.leaf_for(z));
    match forest.task {
        TaskKind::Classification => {
            let votes =
                leaves.filter_map(|leaf| majority_class(leaf.iter().map(|p| forest.train.label(*p)))).map(Label::Class);
            Label::Class(majority_class(votes).expect("forest has at least one tree"))
        }
        TaskKind::Regression => {
            let means: Vec<f64> = leaves
                .map(|leaf| leaf.iter().map(|p| forest.train.label(*p).value()).sum::<f64>() / leaf.len() as f64)
                .collect();
            Label::Numeric(means.iter().sum::<f64>() / means.len() as f64)
        }
    }
}
