//! Cost-sensitive random decision forests with discriminative sparse
//! neighbor approximation (DSNA) for imbalanced classification and
//! regression.
//!
//! The forest carves a local neighborhood around each query: every tree
//! routes the query to a leaf and the leaf sample sets are merged. DSNA
//! then clusters that neighborhood with a label-aware distance, models
//! each cluster by its affine hull and predicts from a sparse, prior-
//! anchored combination of cluster members.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod dsna;
pub mod error;
pub mod forest;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod solvers;

pub use config::{DsnaConfig, ForestConfig, NeighborRadius};
pub use data::{load_dataset, standardize_features, Dataset, Label, Sample, Scaler, Schema, TaskKind};
pub use error::{Error, Result};
pub use metrics::{evaluate_metrics, MetricsReport};
