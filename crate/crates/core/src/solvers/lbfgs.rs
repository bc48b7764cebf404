use std::collections::VecDeque;

use super::SolveDiagnostics;

/// A continuously differentiable function of a real vector.
pub trait SmoothObjective {
    fn dim(&self) -> usize;

    /// Returns the value at `x` and writes the gradient into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.value_grad(x, &mut g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop once `|grad| < tolerance * (1 + objective)`.
    pub tolerance: f64,
    pub max_iters: usize,
    pub memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-6, max_iters: 2000, memory: 8 }
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Limited-memory BFGS with Armijo backtracking. Objective values in the
/// returned trace are non-increasing.
pub fn minimize<F: SmoothObjective + ?Sized>(
    objective: &F,
    x0: Vec<f64>,
    options: &SolverOptions,
) -> (Vec<f64>, SolveDiagnostics) {
    let n = objective.dim();
    assert_eq!(x0.len(), n, "initial point has the wrong dimension");
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective.value_grad(&x, &mut g);
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.memory);

    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iters {
        let gnorm = norm(&g);
        if gnorm < options.tolerance * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }

        let mut step = if history.is_empty() { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = false;
        let mut f_new = f;
        for _ in 0..MAX_BACKTRACKS {
            for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&d) {
                *xn = xi + step * di;
            }
            f_new = objective.value_grad(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + ARMIJO * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || f_new > f {
            // No representable decrease along the search direction.
            break;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == options.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        trace.push(f);
    }

    let gradient_norm = norm(&g);
    if !converged && gradient_norm < options.tolerance * (1.0 + f.abs()) {
        converged = true;
    }
    let diagnostics = SolveDiagnostics { objective: f, iterations, gradient_norm, converged, trace };
    (x, diagnostics)
}

fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
