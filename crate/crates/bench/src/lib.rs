//! Workloads shared by the criterion benchmarks in `benches/`.

use dsna_core::harness::{gen_imbalanced_gaussians, SyntheticSpec};
use dsna_core::Dataset;
use nalgebra::{DMatrix, DVector};

/// The 1:20 two-blob benchmark at `n` samples.
pub fn blobs(n: usize, seed: u64) -> Dataset {
    let spec = SyntheticSpec { sample_count: n, ..SyntheticSpec::default() };
    gen_imbalanced_gaussians(&spec, seed).expect("valid default spec")
}

/// Deterministic dense sparse-coding instance: `d`-dimensional target,
/// `m` atoms and a uniform prior.
pub fn sparse_problem(d: usize, m: usize) -> (DVector<f64>, DMatrix<f64>, Vec<f64>) {
    let atoms = DMatrix::from_fn(d, m, |r, c| ((r * 7 + c * 13) as f64 * 0.37).sin());
    let q = DVector::from_fn(d, |r, _| ((r * 3 + 1) as f64 * 0.91).cos());
    (q, atoms, vec![1.0 / m as f64; m])
}
