//! Discriminative sparse neighbor approximation (DSNA).
//!
//! Given a query and its forest neighborhood, the neighborhood is split
//! into overlapping label-aware clusters, each cluster is modeled by its
//! affine hull, and the query is approximated by a sparse combination of
//! the members of the best hull, anchored to a prior over the query's
//! nearest same-label members. The label follows from the coefficients.
//! Hull choice, prior, coefficients and label are updated alternately
//! until the label settles.

mod alm;
mod cluster;
mod decode;
mod distance;
mod hull;
mod predict;
mod prior;

pub use alm::{solve_sparse_approx, sparse_objective, AlmOptions, SparseSolution};
pub use cluster::{discriminative_cluster, euclidean_cluster, Cluster, CLUSTER_ITERS};
pub use decode::decode_label;
pub use distance::{label_aware_distance, label_gap_weight};
pub use hull::{fit_affine_hull, hull_project, AffineHull, HULL_RANK_THRESHOLD};
pub use predict::{dsna_predict, dsna_predict_in, DsnaSolution};
pub use prior::alpha_prior;
