use super::{check_problem, minimize, LinearModel, SmoothObjective, SolveDiagnostics, SolverOptions};
use crate::error::{Error, Result};

/// `|w|^2 + C * sum_i s_i * max(0, 1 - z_i (w·x_i + b))^2` over `[w, b]`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSvmObjective<'a> {
    pub rows: &'a [Vec<f64>],
    pub signs: &'a [f64],
    pub weights: &'a [f64],
    pub cost: f64,
}

impl SmoothObjective for WeightedSvmObjective<'_> {
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
        for ((x, &z), &s) in self.rows.iter().zip(self.signs).zip(self.weights) {
            if s == 0.0 {
                continue;
            }
            let margin = z * (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b);
            let slack = 1.0 - margin;
            if slack > 0.0 {
                value += self.cost * s * slack * slack;
                let coef = -2.0 * self.cost * s * slack * z;
                for (g, v) in grad[..d].iter_mut().zip(x) {
                    *g += coef * v;
                }
                grad[d] += coef;
            }
        }
        value
    }
}

/// Fits a cost-weighted squared-hinge linear SVM with an unpenalized bias.
///
/// `signs` must be ±1. Fails with [`Error::Degenerate`] unless both signs
/// carry positive weight.
pub fn fit_weighted_svm(
    rows: &[Vec<f64>],
    signs: &[f64],
    weights: &[f64],
    cost: f64,
) -> Result<(LinearModel, SolveDiagnostics)> {
    fit_weighted_svm_with(rows, signs, weights, cost, None, &SolverOptions::default())
}

pub fn fit_weighted_svm_with(
    rows: &[Vec<f64>],
    signs: &[f64],
    weights: &[f64],
    cost: f64,
    start: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<(LinearModel, SolveDiagnostics)> {
    let d = check_problem(rows, signs, weights, cost)?;
    if signs.iter().any(|z| *z != 1.0 && *z != -1.0) {
        return Err(Error::Contract("SVM signs must be +1 or -1".into()));
    }
    let has = |sign: f64| signs.iter().zip(weights).any(|(z, w)| *z == sign && *w > 0.0);
    if !(has(1.0) && has(-1.0)) {
        return Err(Error::Degenerate("SVM needs weighted samples of both signs".into()));
    }
    let objective = WeightedSvmObjective { rows, signs, weights, cost };
    let x0 = match start {
        Some(s) if s.len() == d + 1 => s.to_vec(),
        Some(_) => return Err(Error::Contract("start point has the wrong dimension".into())),
        None => vec![0.0; d + 1],
    };
    let (params, diag) = minimize(&objective, x0, options);
    Ok((LinearModel::from_params(&params), diag))
}
