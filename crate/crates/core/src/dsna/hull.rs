//! Affine hull of a cluster: its member mean plus the span of the
//! centered members.

use nalgebra::{DMatrix, DVector};

use super::cluster::Cluster;
use crate::error::{ensure, Error, Result};

/// Singular values below this fraction of the largest are dropped.
pub const HULL_RANK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineHull {
    pub centroid: DVector<f64>,
    /// Orthonormal columns spanning the centered members.
    pub basis: DMatrix<f64>,
}

impl AffineHull {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dimension(&self) -> usize {
        self.centroid.len()
    }

    /// The hull point `μ + U v`.
    pub fn point(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.centroid + &self.basis * v
    }
}

pub fn fit_affine_hull(cluster: &Cluster) -> Result<AffineHull> {
    ensure!(!cluster.is_empty(), Contract, "cannot fit the hull of an empty cluster");
    let atoms = &cluster.atoms;
    let (d, m) = atoms.shape();
    let centroid = atoms.column_mean();
    if m == 1 {
        return Ok(AffineHull { centroid, basis: DMatrix::zeros(d, 0) });
    }
    let centered = faer::Mat::<f64>::from_fn(d, m, |r, c| atoms[(r, c)] - centroid[r]);
    let svd = centered.thin_svd().map_err(|_| Error::Degenerate("hull decomposition did not converge".into()))?;
    let (u, sigma) = (svd.U(), svd.S().column_vector());
    let top = (0..sigma.nrows()).map(|i| sigma[i]).fold(0.0, f64::max);
    let keep: Vec<usize> = if top > 0.0 {
        (0..sigma.nrows()).filter(|&i| sigma[i] > HULL_RANK_THRESHOLD * top).collect()
    } else {
        Vec::new()
    };
    let basis = DMatrix::from_fn(d, keep.len(), |r, c| u[(r, keep[c])]);
    Ok(AffineHull { centroid, basis })
}

/// Hull coordinates of the projection of `q` and the distance from `q` to
/// the hull.
pub fn hull_project(q: &DVector<f64>, hull: &AffineHull) -> Result<(DVector<f64>, f64)> {
    ensure!(
        q.len() == hull.dimension(),
        Contract,
        "query has dimension {} but the hull lives in {}",
        q.len(),
        hull.dimension()
    );
    let offset = q - &hull.centroid;
    let v = hull.basis.transpose() * &offset;
    let residual = (offset - &hull.basis * &v).norm();
    Ok((v, residual))
}
