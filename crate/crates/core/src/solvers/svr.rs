use super::{check_problem, minimize, LinearModel, SmoothObjective, SolveDiagnostics, SolverOptions};
use crate::error::{Error, Result};

/// `|w|^2 + C * sum_i s_i * max(0, |y_i - (w·x_i + b)| - eps)^2` over
/// `[w, b]`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSvrObjective<'a> {
    pub rows: &'a [Vec<f64>],
    pub targets: &'a [f64],
    pub weights: &'a [f64],
    pub cost: f64,
    pub margin: f64,
}

impl SmoothObjective for WeightedSvrObjective<'_> {
    fn dim(&self) -> usize {
        self.rows[0].len() + 1
    }

    fn value_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let d = params.len() - 1;
        let (w, b) = (&params[..d], params[d]);
        let mut value = 0.0;
        for (g, wj) in grad[..d].iter_mut().zip(w) {
            *g = 2.0 * wj;
            value += wj * wj;
        }
        grad[d] = 0.0;
        for ((x, &y), &s) in self.rows.iter().zip(self.targets).zip(self.weights) {
            if s == 0.0 {
                continue;
            }
            let residual = y - (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b);
            let excess = residual.abs() - self.margin;
            if excess > 0.0 {
                value += self.cost * s * excess * excess;
                // d/d(prediction) of the loss term
                let coef = -2.0 * self.cost * s * excess * residual.signum();
                for (g, v) in grad[..d].iter_mut().zip(x) {
                    *g += coef * v;
                }
                grad[d] += coef;
            }
        }
        value
    }
}

/// Fits a cost-weighted squared ε-insensitive linear SVR with an
/// unpenalized bias.
pub fn fit_weighted_svr(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    cost: f64,
    margin: f64,
) -> Result<(LinearModel, SolveDiagnostics)> {
    fit_weighted_svr_with(rows, targets, weights, cost, margin, None, &SolverOptions::default())
}

pub fn fit_weighted_svr_with(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    cost: f64,
    margin: f64,
    start: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<(LinearModel, SolveDiagnostics)> {
    let d = check_problem(rows, targets, weights, cost)?;
    if rows.len() < 2 {
        return Err(Error::Contract("SVR needs at least 2 samples".into()));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::Contract(format!("SVR margin must be >= 0, got {margin}")));
    }
    let objective = WeightedSvrObjective { rows, targets, weights, cost, margin };
    let x0 = match start {
        Some(s) if s.len() == d + 1 => s.to_vec(),
        Some(_) => return Err(Error::Contract("start point has the wrong dimension".into())),
        None => {
            // Start from the weighted mean target as intercept.
            let total: f64 = weights.iter().sum();
            let mut x0 = vec![0.0; d + 1];
            if total > 0.0 {
                x0[d] = targets.iter().zip(weights).map(|(y, w)| y * w).sum::<f64>() / total;
            }
            x0
        }
    };
    let (params, diag) = minimize(&objective, x0, options);
    Ok((LinearModel::from_params(&params), diag))
}
