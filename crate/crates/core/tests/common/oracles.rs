//! Reference objectives, gradients and a slow first-order minimizer, coded
//! from the problem statements without the library's solver code.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A weighted node problem: rows, ±1 signs or real targets, per-row
/// weights, cost `C` and (SVR only) margin.
#[derive(Debug, Clone)]
pub struct NodeProblem {
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
    pub cost: f64,
    pub margin: f64,
    pub regression: bool,
}

fn score(params: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut s = params[d];
    for j in 0..d {
        s += params[j] * x[j];
    }
    s
}

/// Per-row loss and its derivative with respect to the score.
fn row_loss(p: &NodeProblem, i: usize, s: f64) -> (f64, f64) {
    if p.regression {
        let r = s - p.targets[i];
        let e = r.abs() - p.margin;
        if e <= 0.0 {
            (0.0, 0.0)
        } else {
            (e * e, 2.0 * e * r.signum())
        }
    } else {
        let h = 1.0 - p.targets[i] * s;
        if h <= 0.0 {
            (0.0, 0.0)
        } else {
            (h * h, -2.0 * h * p.targets[i])
        }
    }
}

/// `|w|^2 + C Σ s_i loss_i`, bias unpenalized.
pub fn objective(p: &NodeProblem, params: &[f64]) -> f64 {
    let d = params.len() - 1;
    let reg: f64 = params[..d].iter().map(|w| w * w).sum();
    let data: f64 = (0..p.rows.len()).map(|i| p.weights[i] * row_loss(p, i, score(params, &p.rows[i])).0).sum();
    reg + p.cost * data
}

pub fn gradient(p: &NodeProblem, params: &[f64]) -> Vec<f64> {
    let d = params.len() - 1;
    let mut g: Vec<f64> = params[..d].iter().map(|w| 2.0 * w).collect();
    g.push(0.0);
    for i in 0..p.rows.len() {
        let (_, dl) = row_loss(p, i, score(params, &p.rows[i]));
        let c = p.cost * p.weights[i] * dl;
        for j in 0..d {
            g[j] += c * p.rows[i][j];
        }
        g[d] += c;
    }
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Accelerated gradient descent with fixed step `1/L`, where
/// `L = 2 + 2C Σ s_i (|x_i|^2 + 1)` bounds the curvature, with gradient-based
/// restarts, run to a tiny gradient or a large iteration cap.
pub fn agd_minimize(p: &NodeProblem) -> (Vec<f64>, f64) {
    let d = p.rows[0].len();
    let lip =
        2.0 + 2.0 * p.cost * (0..p.rows.len()).map(|i| p.weights[i] * (norm(&p.rows[i]).powi(2) + 1.0)).sum::<f64>();
    let step = 1.0 / lip;
    let mut x = vec![0.0; d + 1];
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..2_000_000 {
        let g = gradient(p, &y);
        let next: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let gx = gradient(p, &next);
        if norm(&gx) <= 1e-11 * (1.0 + objective(p, &next)) {
            x = next;
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum: f64 = g.iter().zip(next.iter().zip(&x)).map(|(gi, (n, o))| gi * (n - o)).sum();
        if momentum > 0.0 {
            y = next.clone();
            t = 1.0;
        } else {
            y = next.iter().zip(&x).map(|(n, o)| n + (t - 1.0) / t_next * (n - o)).collect();
            t = t_next;
        }
        x = next;
    }
    let f = objective(p, &x);
    (x, f)
}

/// Central finite-difference gradient with step `h`.
pub fn finite_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let up = f(&probe);
        probe[j] = x[j] - h;
        let down = f(&probe);
        probe[j] = x[j];
        g[j] = (up - down) / (2.0 * h);
    }
    g
}

/// Random node problem with at most 50 rows and 10 features. Class
/// problems come from two shifted Gaussian groups weighted by the
/// inverse-proportion rule; regression targets are a noisy linear function
/// of the rows with bin-like weights.
pub fn random_node_problem(rng: &mut ChaCha8Rng, regression: bool) -> NodeProblem {
    let n = rng.random_range(4..=50);
    let d = rng.random_range(1..=10);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let cost = [0.1, 1.0, 10.0][rng.random_range(0..3)];
    let mut rows = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    if regression {
        let w: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
            let y = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.3 * normal.sample(rng);
            rows.push(x);
            targets.push(y);
        }
        let weights = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
        let margin = [0.0, 0.1, 0.5][rng.random_range(0..3)];
        return NodeProblem { rows, targets, weights, cost, margin, regression };
    }
    let positives = rng.random_range(1..n);
    for i in 0..n {
        let z = if i < positives { 1.0 } else { -1.0 };
        rows.push((0..d).map(|_| normal.sample(rng) + 0.8 * z).collect());
        targets.push(z);
    }
    let p_pos = positives as f64 / n as f64;
    let weights =
        targets.iter().map(|z| if *z > 0.0 { (1.0 - p_pos) / p_pos } else { p_pos / (1.0 - p_pos) }).collect();
    NodeProblem { rows, targets, weights, cost, margin: 0.0, regression }
}
