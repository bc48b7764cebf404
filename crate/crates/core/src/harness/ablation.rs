//! Four-arm ablation: plain RF, CS-RF, CS-RF with unsupervised affine
//! hulls, and CS-RF with DSNA, all on the same stratified splits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DsnaConfig, ForestConfig};
use crate::data::{Dataset, Label, TaskKind};
use crate::dsna::{dsna_predict, euclidean_cluster, fit_affine_hull, hull_project};
use crate::error::{ensure, Result};
use crate::forest::{baseline_predict, merge_neighborhood, train_forest, CostSensitiveForest};
use crate::metrics::{evaluate_metrics_with_bins, LabelBins, MetricsReport};

/// Share of each stratum held out for testing.
pub const TEST_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "CS-RF")]
    CsRf,
    #[serde(rename = "CS-RF+AH")]
    CsRfAh,
    #[serde(rename = "CS-RF+DSNA")]
    CsRfDsna,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Rf, Method::CsRf, Method::CsRfAh, Method::CsRfDsna];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Rf => "RF",
            Method::CsRf => "CS-RF",
            Method::CsRfAh => "CS-RF+AH",
            Method::CsRfDsna => "CS-RF+DSNA",
        }
    }
}

/// Prediction of the unsupervised affine-hull baseline: plain K-means on
/// the forest neighborhood, then the consensus label of the hull nearest
/// the query.
pub fn unsupervised_ah_predict(forest: &CostSensitiveForest, q: &[f64], k: usize) -> Result<Label> {
    let neighborhood = merge_neighborhood(forest, q)?;
    let z = nalgebra::DVector::from_vec(forest.standardize(q)?);
    let clusters = euclidean_cluster(&forest.train, &neighborhood, k)?;
    let mut best: Option<(f64, usize)> = None;
    for (i, c) in clusters.iter().enumerate() {
        let (_, residual) = hull_project(&z, &fit_affine_hull(c)?)?;
        if best.is_none_or(|(r, _)| residual < r) {
            best = Some((residual, i));
        }
    }
    Ok(clusters[best.expect("at least one cluster").1].consensus())
}

/// Stratified split of `data` into train and test positions. Strata are
/// classes, or equal-width label bins for regression. Every class keeps at
/// least one sample on each side.
pub fn stratified_split(
    data: &Dataset,
    test_fraction: f64,
    bins: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    ensure!(test_fraction > 0.0 && test_fraction < 1.0, Contract, "test fraction must be in (0, 1)");
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    match data.task() {
        TaskKind::Classification => {
            for p in 0..data.len() {
                strata.entry(data.label(p).class().expect("classification") as usize).or_default().push(p);
            }
            for (c, members) in &strata {
                ensure!(members.len() >= 2, Contract, "class {c} has {} sample(s), too few to split", members.len());
            }
        }
        TaskKind::Regression => {
            let binning = LabelBins::over(&data.targets(), bins);
            for p in 0..data.len() {
                strata.entry(binning.bin_of(data.label(p).value())).or_default().push(p);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let n = members.len();
        let mut held = (n as f64 * test_fraction).round() as usize;
        if data.task() == TaskKind::Classification {
            held = held.clamp(1, n - 1);
        }
        test.extend_from_slice(&members[..held]);
        train.extend_from_slice(&members[held..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    ensure!(!train.is_empty() && !test.is_empty(), Contract, "split left one side empty");
    if data.task() == TaskKind::Classification {
        let classes = data.classes().len();
        let seen =
            |ps: &[usize]| ps.iter().map(|p| data.label(*p).class()).collect::<std::collections::BTreeSet<_>>().len();
        ensure!(seen(&train) == classes && seen(&test) == classes, Contract, "a class is absent from a split");
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub predictions: Vec<Label>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// Positions in the input dataset.
    pub train_positions: Vec<usize>,
    pub test_positions: Vec<usize>,
    pub methods: Vec<MethodRun>,
    /// Fraction of DSNA predictions whose outer loop settled.
    pub dsna_converged: f64,
    pub dsna_mean_iterations: f64,
}

impl SeedRun {
    pub fn metrics(&self, method: Method) -> &MetricsReport {
        &self.methods.iter().find(|m| m.method == method).expect("all methods run").metrics
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub task: TaskKind,
    pub seeds: Vec<u64>,
    pub forest_config: ForestConfig,
    pub dsna_config: DsnaConfig,
    /// Least frequent class of the input (classification).
    pub minority_class: Option<u32>,
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
}

fn sig6(v: f64) -> String {
    format!("{}", format!("{v:.5e}").parse::<f64>().unwrap_or(v))
}

impl AblationReport {
    pub fn row(&self, method: Method, metric: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method && r.metric == metric)
    }

    /// One line per method and metric: `method,metric,mean,sd,seed values`.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("method,metric,mean,sd");
        for s in &self.seeds {
            let _ = write!(out, ",seed_{s}");
        }
        out.push('\n');
        for r in &self.summary {
            let _ = write!(out, "{},{},{},{}", r.method.name(), r.metric, sig6(r.mean), sig6(r.sd));
            for v in &r.values {
                let _ = write!(out, ",{}", sig6(*v));
            }
            out.push('\n');
        }
        out
    }

    /// Per-class recall (classification) or per-bin MAE (regression) for
    /// every method and seed: `method,seed,group,lower,upper,support,value`.
    pub fn per_group_errors(&self) -> String {
        let mut out = String::from("method,seed,group,lower,upper,support,value\n");
        for run in &self.runs {
            for m in &run.methods {
                for c in &m.metrics.per_class_recall {
                    let _ = writeln!(
                        out,
                        "{},{},class_{},{},{},{},{}",
                        m.method.name(),
                        run.seed,
                        c.class,
                        c.class,
                        c.class,
                        c.support,
                        sig6(c.recall)
                    );
                }
                for (b, e) in m.metrics.per_bin_mae.iter().enumerate() {
                    let value = e.mae.map(sig6).unwrap_or_else(|| "NA".into());
                    let _ = writeln!(
                        out,
                        "{},{},bin_{b},{},{},{},{value}",
                        m.method.name(),
                        run.seed,
                        sig6(e.lower),
                        sig6(e.upper),
                        e.support
                    );
                }
            }
        }
        out
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn minority_of(data: &Dataset) -> Option<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for l in data.labels() {
        *counts.entry(l.class()?).or_default() += 1;
    }
    let mut best: Option<(u32, usize)> = None;
    for (c, n) in counts {
        if best.is_none_or(|(_, m)| n < m) {
            best = Some((c, n));
        }
    }
    best.map(|b| b.0)
}

fn run_seed(data: &Dataset, forest_config: &ForestConfig, dsna_config: &DsnaConfig, seed: u64) -> Result<SeedRun> {
    let bins = forest_config.regression_cost_bins;
    let (train_positions, test_positions) = stratified_split(data, TEST_FRACTION, bins, seed)?;
    let train = data.subset(&train_positions)?;
    let cs_config = ForestConfig { seed, ..forest_config.clone() };
    let plain = train_forest(&train, &cs_config.plain())?;
    let cs = train_forest(&train, &cs_config)?;
    let truths: Vec<Label> = test_positions.iter().map(|p| data.label(*p)).collect();
    let queries: Vec<&[f64]> = test_positions.iter().map(|p| data.features(*p)).collect();

    let mut methods = Vec::with_capacity(4);
    let mut converged = 0usize;
    let mut iterations = 0usize;
    for method in Method::ALL {
        let mut predictions = Vec::with_capacity(queries.len());
        for q in &queries {
            let label = match method {
                Method::Rf => baseline_predict(&plain, q)?,
                Method::CsRf => baseline_predict(&cs, q)?,
                Method::CsRfAh => unsupervised_ah_predict(&cs, q, dsna_config.cluster_count)?,
                Method::CsRfDsna => {
                    let s = dsna_predict(&cs, q, dsna_config)?;
                    converged += usize::from(s.converged);
                    iterations += s.outer_iterations;
                    s.label
                }
            };
            predictions.push(label);
        }
        let metrics = evaluate_metrics_with_bins(&predictions, &truths, data.task(), bins)?;
        methods.push(MethodRun { method, predictions, metrics });
    }
    let n = queries.len() as f64;
    Ok(SeedRun {
        seed,
        train_positions,
        test_positions,
        methods,
        dsna_converged: converged as f64 / n,
        dsna_mean_iterations: iterations as f64 / n,
    })
}

/// Runs all four methods for every seed and summarizes mean and sample
/// standard deviation per method and metric. Seeds run in parallel.
pub fn run_ablation(
    data: &Dataset,
    forest_config: &ForestConfig,
    dsna_config: &DsnaConfig,
    seeds: &[u64],
) -> Result<AblationReport> {
    ensure!(!seeds.is_empty(), Contract, "need at least one seed");
    forest_config.validate()?;
    dsna_config.validate()?;
    let runs: Vec<SeedRun> =
        seeds.par_iter().map(|s| run_seed(data, forest_config, dsna_config, *s)).collect::<Result<_>>()?;
    let minority_class = minority_of(data);

    let mut summary = Vec::new();
    for method in Method::ALL {
        let mut metric = |name: &str, f: &dyn Fn(&MetricsReport) -> Option<f64>| {
            let values: Option<Vec<f64>> = runs.iter().map(|r| f(r.metrics(method))).collect();
            if let Some(values) = values {
                let (mean, sd) = mean_sd(&values);
                summary.push(SummaryRow { method, metric: name.to_string(), mean, sd, values });
            }
        };
        match data.task() {
            TaskKind::Classification => {
                metric("accuracy", &|m| m.accuracy);
                metric("g_mean", &|m| m.g_mean);
                if let Some(c) = minority_class {
                    metric("minority_recall", &|m| m.recall_of(c));
                }
            }
            TaskKind::Regression => metric("mae", &|m| m.mae),
        }
    }
    Ok(AblationReport {
        task: data.task(),
        seeds: seeds.to_vec(),
        forest_config: forest_config.clone(),
        dsna_config: dsna_config.clone(),
        minority_class,
        runs,
        summary,
    })
}
