//! Synthetic imbalanced benchmarks and the ablation runner.

mod ablation;
mod synth;

pub use ablation::{
    run_ablation, stratified_split, unsupervised_ah_predict, AblationReport, Method, MethodRun, SeedRun, SummaryRow,
    TEST_FRACTION,
};
pub use synth::{
    class_counts, gen_imbalanced_gaussians, gen_imbalanced_regression, generate, CurveFamily, SyntheticSpec,
    DEFAULT_SKEW,
};
