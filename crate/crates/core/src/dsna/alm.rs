//! Augmented Lagrangian solver for
//!
//! ```text
//! min_a |q - L a|_2 + λ |a|_1 + γ |a - prior|_1
//! ```
//!
//! The three nonsmooth terms are split off onto auxiliary variables
//! `e = q - L a`, `u = a` and `v = a - prior`. Each sweep minimizes the
//! augmented Lagrangian over `a` (a fixed linear system), then over
//! `(e, u, v)` in closed form (block shrinkage and two soft-thresholds),
//! then takes a multiplier step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmOptions {
    /// Initial penalty parameter.
    pub rho: f64,
    /// Multiplicative penalty growth per sweep.
    pub growth: f64,
    pub rho_max: f64,
    /// Stop when the primal residual and the scaled dual residual both
    /// fall below this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for AlmOptions {
    fn default() -> Self {
        AlmOptions { rho: 0.1, growth: 1.0, rho_max: 1e6, tolerance: 1e-6, max_iters: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective of the best iterate after each sweep.
    pub trace: Vec<f64>,
}

/// Value of the sparse approximation objective at `alpha`.
pub fn sparse_objective(
    q: &DVector<f64>,
    atoms: &DMatrix<f64>,
    prior: &[f64],
    lambda: f64,
    gamma: f64,
    alpha: &[f64],
) -> f64 {
    let a = DVector::from_column_slice(alpha);
    let fit = (q - atoms * &a).norm();
    let l1: f64 = alpha.iter().map(|v| v.abs()).sum();
    let anchor: f64 = alpha.iter().zip(prior).map(|(a, p)| (a - p).abs()).sum();
    fit + lambda * l1 + gamma * anchor
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Solves `(LᵀL + 2I) a = r` with a factorization of the smaller Gram
/// matrix.
enum Normal {
    Atoms(Cholesky<f64, Dyn>),
    /// Woodbury form through `2I + L Lᵀ`.
    Features(Cholesky<f64, Dyn>),
}

impl Normal {
    fn new(atoms: &DMatrix<f64>) -> Normal {
        let (d, m) = atoms.shape();
        if m <= d {
            let mut g = atoms.transpose() * atoms;
            for i in 0..m {
                g[(i, i)] += 2.0;
            }
            Normal::Atoms(Cholesky::new(g).expect("shifted Gram matrix is positive definite"))
        } else {
            let mut g = atoms * atoms.transpose();
            for i in 0..d {
                g[(i, i)] += 2.0;
            }
            Normal::Features(Cholesky::new(g).expect("shifted Gram matrix is positive definite"))
        }
    }

    /// Writes the solution of the normal system for `rhs` into `out`.
    fn solve_into(&self, atoms: &DMatrix<f64>, rhs: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            Normal::Atoms(c) => {
                out.copy_from(rhs);
                c.solve_mut(out);
            }
            Normal::Features(c) => {
                let mut inner = atoms * rhs;
                c.solve_mut(&mut inner);
                out.copy_from(rhs);
                out.gemv_tr(-0.5, atoms, &inner, 0.5);
            }
        }
    }
}

pub fn solve_sparse_approx(
    q: &DVector<f64>,
    atoms: &DMatrix<f64>,
    prior: &[f64],
    lambda: f64,
    gamma: f64,
    options: &AlmOptions,
) -> Result<SparseSolution> {
    let (d, m) = atoms.shape();
    ensure!(m >= 1 && d >= 1, Contract, "atom matrix must be nonempty");
    ensure!(q.len() == d, Contract, "query has dimension {} but atoms have {}", q.len(), d);
    ensure!(prior.len() == m, Contract, "prior has {} entries for {} atoms", prior.len(), m);
    ensure!(lambda >= 0.0 && gamma >= 0.0, Contract, "penalty weights must be >= 0");
    ensure!(options.rho > 0.0 && options.growth >= 1.0, Contract, "invalid penalty schedule");

    let normal = Normal::new(atoms);
    let prior_v = DVector::from_column_slice(prior);

    let mut alpha = prior_v.clone();
    let mut e = q - atoms * &alpha;
    let mut u = alpha.clone();
    let mut v = DVector::zeros(m);
    // Scaled multipliers.
    let mut ye = DVector::zeros(d);
    let mut yu = DVector::zeros(m);
    let mut yv = DVector::zeros(m);
    let mut rho = options.rho;

    let mut fit = DVector::zeros(d);
    let mut e_new = DVector::zeros(d);
    let mut rhs = DVector::zeros(m);
    let mut change = DVector::zeros(m);

    let l1 = |a: &DVector<f64>| -> f64 {
        let mut s = 0.0;
        let mut t = 0.0;
        for (x, p) in a.iter().zip(prior) {
            s += x.abs();
            t += (x - p).abs();
        }
        lambda * s + gamma * t
    };
    let mut best = alpha.as_slice().to_vec();
    let mut best_value = sparse_objective(q, atoms, prior, lambda, gamma, &best);
    let mut trace = Vec::with_capacity(options.max_iters.min(4096));
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iters {
        iterations += 1;
        // a-update: (LᵀL + 2I) a = Lᵀ(q - e + ye) + (u - yu) + (prior + v - yv)
        fit.copy_from(q);
        fit -= &e;
        fit += &ye;
        for i in 0..m {
            rhs[i] = u[i] - yu[i] + prior[i] + v[i] - yv[i];
        }
        rhs.gemv_tr(1.0, atoms, &fit, 1.0);
        normal.solve_into(atoms, &rhs, &mut alpha);

        // e-update: block shrinkage of q - L a + ye.
        fit.copy_from(q);
        fit.gemv(-1.0, atoms, &alpha, 1.0);
        e_new.copy_from(&fit);
        e_new += &ye;
        let tn = e_new.norm();
        if tn > 1.0 / rho {
            e_new *= 1.0 - 1.0 / (rho * tn);
        } else {
            e_new.fill(0.0);
        }

        // u- and v-updates, multiplier steps and residuals.
        let mut primal_sq = 0.0;
        for i in 0..m {
            let u_new = soft(alpha[i] + yu[i], lambda / rho);
            let v_new = soft(alpha[i] - prior[i] + yv[i], gamma / rho);
            let ru = alpha[i] - u_new;
            let rv = alpha[i] - prior[i] - v_new;
            primal_sq += ru * ru + rv * rv;
            yu[i] += ru;
            yv[i] += rv;
            change[i] = (u[i] - u_new) + (v[i] - v_new);
            u[i] = u_new;
            v[i] = v_new;
        }
        let mut de = e_new.clone();
        de -= &e;
        change.gemv_tr(1.0, atoms, &de, 1.0);
        let dual = rho * change.norm();
        let mut re = fit.clone();
        re -= &e_new;
        primal_sq += re.norm_squared();
        ye += &re;
        e.copy_from(&e_new);
        let primal = primal_sq.sqrt();

        // Best iterate among a (whose fit is known) and u.
        let value = fit.norm() + l1(&alpha);
        if value < best_value {
            best_value = value;
            best.copy_from_slice(alpha.as_slice());
        }
        fit.copy_from(q);
        fit.gemv(-1.0, atoms, &u, 1.0);
        let value = fit.norm() + l1(&u);
        if value < best_value {
            best_value = value;
            best.copy_from_slice(u.as_slice());
        }
        trace.push(best_value);

        if primal < options.tolerance && dual < options.tolerance {
            converged = true;
            break;
        }

        let next = (rho * options.growth).min(options.rho_max);
        if next != rho {
            let scale = rho / next;
            ye *= scale;
            yu *= scale;
            yv *= scale;
            rho = next;
        }
    }

    Ok(SparseSolution { alpha: best, objective: best_value, iterations, converged, trace })
}
