//! Stored reference solutions.

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

pub struct SparseInstance {
    pub q: DVector<f64>,
    pub atoms: DMatrix<f64>,
    pub prior: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: Vec<f64>,
    pub objective: f64,
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// Sparse approximation problems solved by a generic conic solver.
pub fn load_sparse_fixtures() -> Vec<SparseInstance> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/sparse_oracle.json");
    let root: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    root["instances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|inst| {
            let rows: Vec<Vec<f64>> = inst["atoms"].as_array().unwrap().iter().map(floats).collect();
            let atoms = DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]);
            SparseInstance {
                q: DVector::from_vec(floats(&inst["q"])),
                atoms,
                prior: floats(&inst["prior"]),
                lambda: inst["lambda"].as_f64().unwrap(),
                gamma: inst["gamma"].as_f64().unwrap(),
                alpha: floats(&inst["alpha"]),
                objective: inst["objective"].as_f64().unwrap(),
            }
        })
        .collect()
}
