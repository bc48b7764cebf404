//! One check per acceptance criterion. Each returns a verdict with the
//! measured quantities so the acceptance run can print them.

use std::time::Instant;

use dsna_core::dsna::{dsna_predict, fit_affine_hull, hull_project, solve_sparse_approx, AlmOptions, Cluster};
use dsna_core::forest::{baseline_predict, train_forest};
use dsna_core::harness::{
    gen_imbalanced_gaussians, gen_imbalanced_regression, generate, run_ablation, stratified_split, Method,
    SyntheticSpec, TEST_FRACTION,
};
use dsna_core::model::{load_model, model_to_bytes, save_model, ModelFile};
use dsna_core::solvers::{
    fit_weighted_svm, fit_weighted_svr, SmoothObjective, WeightedSvmObjective, WeightedSvrObjective,
};
use dsna_core::{Dataset, DsnaConfig, ForestConfig, Label, TaskKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::fixtures::load_sparse_fixtures;
use super::oracles::{agd_minimize, finite_difference, gradient, objective, random_node_problem, NodeProblem};
use super::reference_rf::ReferenceForest;

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn line(&self, number: usize, name: &str) -> String {
        format!("criterion {number} {} {name}: {}", if self.pass { "PASS" } else { "FAIL" }, self.detail)
    }
}

fn rel_norm_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

fn library_value_grad(p: &NodeProblem, x: &[f64]) -> (f64, Vec<f64>) {
    let mut g = vec![0.0; x.len()];
    let v = if p.regression {
        WeightedSvrObjective { rows: &p.rows, targets: &p.targets, weights: &p.weights, cost: p.cost, margin: p.margin }
            .value_grad(x, &mut g)
    } else {
        WeightedSvmObjective { rows: &p.rows, signs: &p.targets, weights: &p.weights, cost: p.cost }
            .value_grad(x, &mut g)
    };
    (v, g)
}

pub const SOLVER_OBJECTIVE_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

/// Weighted SVM and SVR fits against an accelerated-gradient oracle, and
/// analytic gradients against central differences.
pub fn solver_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst_gap: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let mut worst_cross: f64 = 0.0;
    let mut solve_time = 0.0;
    let mut failures = 0;
    for regression in [false, true] {
        for _ in 0..100 {
            let p = random_node_problem(&mut rng, regression);
            let start = Instant::now();
            let fit = if regression {
                fit_weighted_svr(&p.rows, &p.targets, &p.weights, p.cost, p.margin)
            } else {
                fit_weighted_svm(&p.rows, &p.targets, &p.weights, p.cost)
            };
            solve_time += start.elapsed().as_secs_f64();
            let Ok((model, _)) = fit else {
                failures += 1;
                continue;
            };
            let mut params = model.weights.clone();
            params.push(model.bias);
            let (_, oracle_value) = agd_minimize(&p);
            let value = objective(&p, &params);
            worst_gap = worst_gap.max((value - oracle_value).abs() / oracle_value.abs().max(1e-300));

            let normal = Normal::new(0.0, 1.0).unwrap();
            for _ in 0..3 {
                let x: Vec<f64> = (0..params.len()).map(|_| normal.sample(&mut rng)).collect();
                let (_, g) = library_value_grad(&p, &x);
                let fd = finite_difference(&|y: &[f64]| library_value_grad(&p, y).0, &x, FD_STEP);
                worst_fd = worst_fd.max(rel_norm_error(&g, &fd));
                worst_cross = worst_cross.max(rel_norm_error(&g, &gradient(&p, &x)));
            }
        }
    }
    let pass = failures == 0
        && worst_gap <= SOLVER_OBJECTIVE_TOL
        && worst_fd < FD_TOL
        && worst_cross < FD_TOL
        && solve_time < 30.0;
    Verdict {
        pass,
        detail: format!(
            "100 SVM + 100 SVR, fit failures {failures}, worst relative objective gap {worst_gap:.2e} (tol {SOLVER_OBJECTIVE_TOL:.0e}), \
             worst finite-difference error {worst_fd:.2e} and oracle-gradient error {worst_cross:.2e} (tol {FD_TOL:.0e}), \
             solver time {solve_time:.2} s (limit 30 s)"
        ),
    }
}

pub const ALM_ALPHA_TOL: f64 = 1e-3;
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Sparse solver against the stored conic-solver references.
pub fn alm_oracle() -> Verdict {
    let instances = load_sparse_fixtures();
    let options = AlmOptions::default();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut nonmonotone = 0;
    let mut unconverged = 0;
    for inst in &instances {
        let s = solve_sparse_approx(&inst.q, &inst.atoms, &inst.prior, inst.lambda, inst.gamma, &options).unwrap();
        unconverged += usize::from(!s.converged);
        let err = s.alpha.iter().zip(&inst.alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        if s.trace.windows(2).any(|w| w[1] > w[0] + MONOTONE_SLACK) {
            nonmonotone += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = instances.len() == 100 && worst <= ALM_ALPHA_TOL && nonmonotone == 0 && elapsed < 60.0;
    Verdict {
        pass,
        detail: format!(
            "{} instances, worst L-inf error {worst:.2e} (tol {ALM_ALPHA_TOL:.0e}), non-monotone traces {nonmonotone}, \
             unconverged {unconverged}, {elapsed:.2} s (limit 60 s)",
            instances.len()
        ),
    }
}

/// Random cluster with a chosen intrinsic rank, duplicates included.
fn random_cluster(rng: &mut ChaCha8Rng) -> Cluster {
    let d = rng.random_range(1..=8);
    let m = rng.random_range(1..=12);
    let scale = [0.01, 1.0, 100.0][rng.random_range(0..3)];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let rank = rng.random_range(0..=d.min(m));
    let origin: Vec<f64> = (0..d).map(|_| scale * normal.sample(rng)).collect();
    let dirs: Vec<Vec<f64>> = (0..rank).map(|_| (0..d).map(|_| normal.sample(rng)).collect()).collect();
    let mut atoms = DMatrix::zeros(d, m);
    for c in 0..m {
        if c > 0 && rng.random_bool(0.15) {
            let src = rng.random_range(0..c);
            let col = atoms.column(src).clone_owned();
            atoms.set_column(c, &col);
            continue;
        }
        for r in 0..d {
            atoms[(r, c)] = origin[r] + scale * dirs.iter().map(|v| v[r] * normal.sample(rng)).sum::<f64>();
        }
    }
    Cluster { members: (0..m).collect(), atoms, labels: vec![Label::Class(0); m] }
}

pub const ORTHONORMAL_TOL: f64 = 1e-10;
pub const MEMBER_RESIDUAL_TOL: f64 = 1e-8;

/// Orthonormal bases, members on their hulls, hull residual never above
/// the nearest-member distance.
pub fn hull_invariants() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (mut worst_orth, mut worst_member): (f64, f64) = (0.0, 0.0);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut rank_violations = 0;
    for _ in 0..1000 {
        let cluster = random_cluster(&mut rng);
        let hull = fit_affine_hull(&cluster).unwrap();
        let (d, m) = (cluster.atoms.nrows(), cluster.atoms.ncols());
        if hull.rank() > d.min(m - 1) {
            rank_violations += 1;
        }
        let gram = hull.basis.transpose() * &hull.basis;
        let orth = (gram - DMatrix::identity(hull.rank(), hull.rank())).abs().max();
        worst_orth = worst_orth.max(if hull.rank() == 0 { 0.0 } else { orth });
        for c in 0..m {
            let x = cluster.atoms.column(c).clone_owned();
            worst_member = worst_member.max(hull_project(&x, &hull).unwrap().1);
        }
        let spread = cluster.atoms.abs().max().max(1.0);
        for _ in 0..5 {
            let q = DVector::from_fn(d, |_, _| spread * normal.sample(&mut rng));
            let residual = hull_project(&q, &hull).unwrap().1;
            let nearest = (0..m).map(|c| (&q - cluster.atoms.column(c)).norm()).fold(f64::INFINITY, f64::min);
            worst_excess = worst_excess.max(residual - nearest);
        }
    }
    let pass = worst_orth < ORTHONORMAL_TOL
        && worst_member < MEMBER_RESIDUAL_TOL
        && worst_excess <= 0.0
        && rank_violations == 0;
    Verdict {
        pass,
        detail: format!(
            "1000 clusters, worst orthonormality error {worst_orth:.2e} (tol {ORTHONORMAL_TOL:.0e}), worst member residual \
             {worst_member:.2e} (tol {MEMBER_RESIDUAL_TOL:.0e}), max residual minus nearest-member distance {worst_excess:.2e} (must be <= 0), \
             rank bound violations {rank_violations}"
        ),
    }
}

/// Blob benchmark training set, test positions and a cost-sensitive
/// forest, all from `seed`.
pub fn blob_setup(seed: u64) -> (Dataset, Vec<usize>, dsna_core::forest::CostSensitiveForest) {
    let data = generate(&SyntheticSpec::default()).unwrap();
    let (train, test) = stratified_split(&data, TEST_FRACTION, 10, seed).unwrap();
    let forest =
        train_forest(&data.subset(&train).unwrap(), &ForestConfig { seed, ..ForestConfig::default() }).unwrap();
    (data, test, forest)
}

/// Outer-loop iteration counts over 200 benchmark queries.
pub fn convergence() -> Verdict {
    let (data, test, forest) = blob_setup(1);
    let step = test.len() / 200;
    let queries: Vec<usize> = test.iter().step_by(step).take(200).copied().collect();
    let config = DsnaConfig::default();
    let mut within_ten = 0;
    let mut terminated = 0;
    let mut histogram = [0usize; 4];
    for p in &queries {
        let s = dsna_predict(&forest, data.features(*p), &config).unwrap();
        within_ten += usize::from(s.converged && s.outer_iterations <= 10);
        terminated += usize::from(s.outer_iterations <= config.max_outer_iters);
        histogram[match s.outer_iterations {
            1 => 0,
            2 => 1,
            3..=10 => 2,
            _ => 3,
        }] += 1;
    }
    let n = queries.len();
    let fraction = within_ten as f64 / n as f64;
    Verdict {
        pass: n == 200 && fraction >= 0.9 && terminated == n,
        detail: format!(
            "{n} queries, converged within 10 outer iterations {fraction:.3} (need >= 0.90), terminated by T=50 {terminated}/{n}, \
             iterations 1/2/3-10/>10: {histogram:?}"
        ),
    }
}

pub const RECALL_GAIN: f64 = 0.10;
pub const ACCURACY_LOSS: f64 = 0.05;

/// Four-arm ablation on the 1:20 blob benchmark; returns the imbalance
/// criterion and the ablation-distinctness criterion.
pub fn imbalance_benchmark() -> (Verdict, Verdict) {
    let data = generate(&SyntheticSpec::default()).unwrap();
    let seeds = [1, 2, 3, 4, 5];
    let start = Instant::now();
    let report = run_ablation(&data, &ForestConfig::default(), &DsnaConfig::default(), &seeds).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let row = |m: Method, metric: &str| report.row(m, metric).unwrap().clone();
    let recall_rf = row(Method::Rf, "minority_recall");
    let recall_dsna = row(Method::CsRfDsna, "minority_recall");
    let acc_rf = row(Method::Rf, "accuracy");
    let acc_dsna = row(Method::CsRfDsna, "accuracy");
    let g = |m: Method| row(m, "g_mean").values;
    let (g_rf, g_cs, g_ah, g_dsna) = (g(Method::Rf), g(Method::CsRf), g(Method::CsRfAh), g(Method::CsRfDsna));
    let ordered = (0..seeds.len()).filter(|&i| g_rf[i] <= g_cs[i] && g_cs[i] <= g_dsna[i]).count();
    let ah_below = (0..seeds.len()).filter(|&i| g_ah[i] <= g_dsna[i]).count();
    let gain = recall_dsna.mean - recall_rf.mean;
    let loss = acc_rf.mean - acc_dsna.mean;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/");
    let c5 = Verdict {
        pass: gain >= RECALL_GAIN && loss <= ACCURACY_LOSS && ordered >= 4 && elapsed < 300.0,
        detail: format!(
            "minority recall RF {:.3} vs CS-RF+DSNA {:.3} (gain {gain:+.3}, need >= {RECALL_GAIN}), accuracy RF {:.3} vs CS-RF+DSNA {:.3} \
             (loss {loss:+.3}, need <= {ACCURACY_LOSS}), G-mean ordering in {ordered}/5 seeds (need >= 4; RF {} CS-RF {} DSNA {}), \
             {elapsed:.0} s (limit 300 s)",
            recall_rf.mean,
            recall_dsna.mean,
            acc_rf.mean,
            acc_dsna.mean,
            fmt(&g_rf),
            fmt(&g_cs),
            fmt(&g_dsna)
        ),
    };
    let c7 = Verdict {
        pass: ah_below >= 4,
        detail: format!(
            "CS-RF+AH G-mean <= CS-RF+DSNA in {ah_below}/5 seeds (need >= 4; AH {} DSNA {})",
            fmt(&g_ah),
            fmt(&g_dsna)
        ),
    };
    (c5, c7)
}

pub const EXTRAPOLATION_RATIO: f64 = 0.7;

/// Queries inside a label hole of `y = 2x`: DSNA against leaf means.
pub fn regression_extrapolation() -> Verdict {
    let mut rf_maes = Vec::new();
    let mut dsna_maes = Vec::new();
    let config = DsnaConfig::default();
    for seed in 1..=5u64 {
        let spec = SyntheticSpec {
            task: TaskKind::Regression,
            sample_count: 500,
            skew: 0.0,
            hole: Some([5.0, 7.0]),
            ..SyntheticSpec::default()
        };
        let train = gen_imbalanced_regression(&spec, seed).unwrap();
        let forest_config = ForestConfig { seed, ..ForestConfig::default() };
        let plain = train_forest(&train, &forest_config.plain()).unwrap();
        let cs = train_forest(&train, &forest_config).unwrap();
        let (mut rf, mut ds) = (0.0, 0.0);
        let n = 50;
        for i in 0..n {
            let x = 2.5 + (i as f64 + 0.5) / n as f64;
            let truth = 2.0 * x;
            rf += (baseline_predict(&plain, &[x]).unwrap().value() - truth).abs();
            ds += (dsna_predict(&cs, &[x], &config).unwrap().label.value() - truth).abs();
        }
        rf_maes.push(rf / n as f64);
        dsna_maes.push(ds / n as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (rf, ds) = (mean(&rf_maes), mean(&dsna_maes));
    Verdict {
        pass: ds <= EXTRAPOLATION_RATIO * rf,
        detail: format!(
            "hole [5,7], 5 seeds x 50 queries, MAE plain RF {rf:.4} vs CS-RF+DSNA {ds:.4} (ratio {:.3}, need <= {EXTRAPOLATION_RATIO})",
            ds / rf
        ),
    }
}

/// Repeat runs and save/load round trips are bit-identical.
pub fn determinism() -> Verdict {
    let spec = SyntheticSpec { sample_count: 300, ratio: vec![1.0, 5.0], ..SyntheticSpec::default() };
    let data = gen_imbalanced_gaussians(&spec, 3).unwrap();
    let config = ForestConfig { seed: 11, ..ForestConfig::default() };
    let dsna = DsnaConfig::default();
    let a = train_forest(&data, &config).unwrap();
    let b = train_forest(&data, &config).unwrap();
    let model_a = ModelFile::new(a, dsna.clone());
    let model_b = ModelFile::new(b, dsna.clone());
    let forest_same = model_to_bytes(&model_a) == model_to_bytes(&model_b);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let queries: Vec<Vec<f64>> =
        (0..50).map(|_| vec![rng.random_range(-3.0..5.0), rng.random_range(-3.0..3.0)]).collect();
    let run = |m: &ModelFile| -> Vec<_> {
        queries
            .iter()
            .map(|q| (dsna_predict(&m.forest, q, &m.dsna).unwrap(), baseline_predict(&m.forest, q).unwrap()))
            .collect()
    };
    let first = run(&model_a);
    let predictions_same = first == run(&model_b) && first == run(&model_a);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_model(&model_a, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    let round_trip_same = loaded == model_a && run(&loaded) == first;

    let small = ForestConfig { tree_count: 5, ..config };
    let r1 = run_ablation(&data, &small, &dsna, &[1, 2]).unwrap();
    let r2 = run_ablation(&data, &small, &dsna, &[1, 2]).unwrap();
    let reports_same = r1 == r2 && r1.to_delimited() == r2.to_delimited();

    Verdict {
        pass: forest_same && predictions_same && round_trip_same && reports_same,
        detail: format!(
            "forest bytes identical {forest_same}, 50 predictions identical {predictions_same}, save/load round trip identical \
             {round_trip_same}, ablation reports identical {reports_same}"
        ),
    }
}

/// Plain forest predictions against the independent reference forest.
pub fn baseline_reduction() -> Verdict {
    let four_d = gen_imbalanced_gaussians(
        &SyntheticSpec { sample_count: 200, ratio: vec![1.0, 3.0], dimension: 4, ..SyntheticSpec::default() },
        5,
    )
    .unwrap();
    let three_class = gen_imbalanced_gaussians(
        &SyntheticSpec { sample_count: 150, ratio: vec![1.0, 2.0, 4.0], overlap: 1.5, ..SyntheticSpec::default() },
        6,
    )
    .unwrap();
    let line = gen_imbalanced_regression(
        &SyntheticSpec { task: TaskKind::Regression, sample_count: 120, noise: 0.5, ..SyntheticSpec::default() },
        7,
    )
    .unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, data) in [("4-D two-class", &four_d), ("three-class", &three_class), ("1-D regression", &line)] {
        let config = ForestConfig { seed: 7, tree_count: 10, cost_sensitive: false, ..ForestConfig::default() };
        let forest = train_forest(data, &config).unwrap();
        let reference = ReferenceForest::fit(data, &config);
        let mut queries: Vec<Vec<f64>> = data.samples().iter().map(|s| s.features.clone()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let base = queries[rng.random_range(0..data.len())].clone();
            queries.push(base.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect());
        }
        let mismatches =
            queries.iter().filter(|q| baseline_predict(&forest, q).unwrap() != reference.predict(q)).count();
        pass &= mismatches == 0;
        parts.push(format!("{name} {mismatches}/{} mismatches", queries.len()));
    }
    Verdict { pass, detail: parts.join(", ") }
}
