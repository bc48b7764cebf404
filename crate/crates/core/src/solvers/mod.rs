//! Cost-weighted linear SVM and SVR used as node splitting functions.
//!
//! Both objectives use squared losses, which makes them continuously
//! differentiable and convex. They are minimized with L-BFGS under an
//! Armijo backtracking line search, so the objective never increases
//! between iterations. The bias is an extra coordinate that is not
//! penalized.

mod lbfgs;
mod svm;
mod svr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lbfgs::{minimize, SmoothObjective, SolverOptions};
pub use svm::{fit_weighted_svm, fit_weighted_svm_with, WeightedSvmObjective};
pub use svr::{fit_weighted_svr, fit_weighted_svr_with, WeightedSvrObjective};

/// Imbalance cost `f(p) = (1 - p) / p` for a group holding proportion `p`.
pub fn cost_weight(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("cost weight needs a proportion in (0, 1], got {p}")));
    }
    Ok((1.0 - p) / p)
}

/// Affine scoring function `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.weights.len());
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub(crate) fn from_params(params: &[f64]) -> LinearModel {
        let (w, b) = params.split_at(params.len() - 1);
        LinearModel { weights: w.to_vec(), bias: b[0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Objective value after each accepted step, starting at the initial
    /// point.
    pub trace: Vec<f64>,
}

pub(crate) fn check_problem(rows: &[Vec<f64>], targets: &[f64], weights: &[f64], cost: f64) -> Result<usize> {
    if rows.is_empty() {
        return Err(Error::Contract("solver needs at least one sample".into()));
    }
    if rows.len() != targets.len() || rows.len() != weights.len() {
        return Err(Error::Contract(format!(
            "{} rows, {} targets, {} weights",
            rows.len(),
            targets.len(),
            weights.len()
        )));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Contract("rows must share a dimension >= 1".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("non-finite sample data".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Contract("sample weights must be finite and >= 0".into()));
    }
    if !(cost > 0.0 && cost.is_finite()) {
        return Err(Error::Contract(format!("cost C must be > 0, got {cost}")));
    }
    Ok(d)
}
