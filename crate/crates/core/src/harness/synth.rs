//! Seeded synthetic imbalanced datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, TaskKind};
use crate::error::{ensure, Result};

/// Default rate of the truncated exponential skew of regression inputs.
pub const DEFAULT_SKEW: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveFamily {
    /// `y = slope * x + intercept`
    Linear,
    /// `y = amplitude * sin(frequency * x) + intercept`
    Sine,
}

/// Generator parameters. Classification uses the class fields, regression
/// the curve fields; the others are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub task: TaskKind,
    pub sample_count: usize,
    pub seed: u64,
    /// Relative class sizes, one part per class (2 to 5 classes).
    pub ratio: Vec<f64>,
    /// Distance between neighboring class means in units of `sigma`.
    pub overlap: f64,
    pub sigma: f64,
    pub dimension: usize,
    pub curve: CurveFamily,
    pub x_range: [f64; 2],
    pub slope: f64,
    pub intercept: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub noise: f64,
    /// Rate of the truncated exponential density of `x` over `x_range`;
    /// zero gives a uniform density.
    pub skew: f64,
    /// Label interval left without samples.
    pub hole: Option<[f64; 2]>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            task: TaskKind::Classification,
            sample_count: 2100,
            seed: 0,
            ratio: vec![1.0, 20.0],
            overlap: 2.0,
            sigma: 1.0,
            dimension: 2,
            curve: CurveFamily::Linear,
            x_range: [0.0, 10.0],
            slope: 2.0,
            intercept: 0.0,
            amplitude: 1.0,
            frequency: 1.0,
            noise: 0.0,
            skew: DEFAULT_SKEW,
            hole: None,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.sample_count >= 20, Config, "sample_count must be >= 20");
        match self.task {
            TaskKind::Classification => {
                ensure!((2..=5).contains(&self.ratio.len()), Config, "need 2 to 5 class ratio parts");
                ensure!(self.ratio.iter().all(|r| *r > 0.0 && r.is_finite()), Config, "ratio parts must be positive");
                ensure!(self.sigma > 0.0 && self.sigma.is_finite(), Config, "sigma must be > 0");
                ensure!(self.overlap >= 0.0 && self.overlap.is_finite(), Config, "overlap must be >= 0");
                ensure!(self.dimension >= 2, Config, "class means need dimension >= 2");
            }
            TaskKind::Regression => {
                ensure!(self.x_range[0] < self.x_range[1], Config, "x_range must be increasing");
                ensure!(self.noise >= 0.0 && self.skew >= 0.0, Config, "noise and skew must be >= 0");
                if let Some([a, b]) = self.hole {
                    ensure!(a < b, Config, "hole must be an increasing interval");
                }
            }
        }
        Ok(())
    }

    /// Noise-free label of input `x`.
    pub fn curve_at(&self, x: f64) -> f64 {
        match self.curve {
            CurveFamily::Linear => self.slope * x + self.intercept,
            CurveFamily::Sine => self.amplitude * (self.frequency * x).sin() + self.intercept,
        }
    }

    /// Mean of class `c`: classes sit on a regular polygon in the first two
    /// coordinates with neighboring means `overlap * sigma` apart.
    pub fn class_mean(&self, c: usize) -> Vec<f64> {
        let k = self.ratio.len();
        let side = self.overlap * self.sigma;
        let mut mean = vec![0.0; self.dimension];
        if k == 2 {
            mean[0] = side * c as f64;
        } else {
            let radius = side / (2.0 * (std::f64::consts::PI / k as f64).sin());
            let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
            mean[0] = radius * angle.cos();
            mean[1] = radius * angle.sin();
        }
        mean
    }
}

/// Class sizes proportional to `ratio`, rounded down, with the remainder
/// added to the largest class (lowest index on ties).
pub fn class_counts(ratio: &[f64], total: usize) -> Result<Vec<usize>> {
    let sum: f64 = ratio.iter().sum();
    let mut counts: Vec<usize> = ratio.iter().map(|r| (total as f64 * r / sum).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut major = 0;
    for (i, r) in ratio.iter().enumerate() {
        if *r > ratio[major] {
            major = i;
        }
    }
    counts[major] += total - assigned;
    ensure!(counts.iter().all(|c| *c >= 1), Config, "ratio {ratio:?} leaves a class empty at {total} samples");
    Ok(counts)
}

/// Isotropic Gaussian classes with exact imbalanced counts. Samples are
/// grouped by class in class order.
pub fn gen_imbalanced_gaussians(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    ensure!(spec.task == TaskKind::Classification, Config, "spec is not a classification spec");
    spec.validate()?;
    let counts = class_counts(&spec.ratio, spec.sample_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, spec.sigma).expect("sigma validated");
    let mut rows = Vec::with_capacity(spec.sample_count);
    let mut labels = Vec::with_capacity(spec.sample_count);
    for (c, &n) in counts.iter().enumerate() {
        let mean = spec.class_mean(c);
        for _ in 0..n {
            rows.push(mean.iter().map(|m| m + normal.sample(&mut rng)).collect());
            labels.push(Label::Class(c as u32));
        }
    }
    Dataset::from_rows(rows, labels, TaskKind::Classification)
}

/// One input from the truncated exponential density over `x_range`.
fn skewed_input<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let t = if spec.skew > 0.0 { -(1.0 - u * (1.0 - (-spec.skew).exp())).ln() / spec.skew } else { u };
    spec.x_range[0] + t * (spec.x_range[1] - spec.x_range[0])
}

/// One-feature regression data `y = curve(x) + noise` with skewed inputs.
/// Draws whose label falls in the hole are rejected and redrawn.
pub fn gen_imbalanced_regression(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    ensure!(spec.task == TaskKind::Regression, Config, "spec is not a regression spec");
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise).expect("noise validated");
    let mut rows = Vec::with_capacity(spec.sample_count);
    let mut labels = Vec::with_capacity(spec.sample_count);
    let mut draws = 0usize;
    while rows.len() < spec.sample_count {
        draws += 1;
        ensure!(draws <= 1000 * spec.sample_count, Config, "hole rejects nearly every draw");
        let x = skewed_input(spec, &mut rng);
        let y = spec.curve_at(x) + noise.sample(&mut rng);
        if let Some([a, b]) = spec.hole {
            if (a..=b).contains(&y) {
                continue;
            }
        }
        rows.push(vec![x]);
        labels.push(Label::Numeric(y));
    }
    Dataset::from_rows(rows, labels, TaskKind::Regression)
}

/// Either generator, by task.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    match spec.task {
        TaskKind::Classification => gen_imbalanced_gaussians(spec, spec.seed),
        TaskKind::Regression => gen_imbalanced_regression(spec, spec.seed),
    }
}
