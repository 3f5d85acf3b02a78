//! Normalized-cut spectral clustering.
//!
//! Embeds nodes with the eigenvectors of the `k` smallest eigenvalues of
//! `L_sym = I - D^{-1/2} A D^{-1/2}`, normalizes the rows to unit length, and
//! groups the rows with k-means.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::features::{kmeans, SubClustering};
use crate::matrix::FeatureMatrix;
use crate::partition::Partition;
use crate::vknng::WeightedAdjacency;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;
const SYMMETRY_TOL: f64 = 1e-12;
const EIGENSPACE_TOL: f64 = 1e-9;

/// Row-normalized spectral coordinates, one row per node.
///
/// Usually `k` columns; more when eigenvalues tie with the `k`-th (for example
/// a graph with more than `k` connected components).
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub coordinates: FeatureMatrix,
    /// Eigenvalues of `L_sym` for the chosen columns, ascending.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SpectralClustering {
    pub partition: Partition,
    pub embedding: SpectralEmbedding,
}

fn validate(a: &WeightedAdjacency) -> Result<Vec<f64>> {
    let w = &a.weights;
    let n = w.size();
    let scale = w.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        if w.get(i, i) != 0.0 {
            return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
        }
        for j in 0..n {
            let v = w.get(i, j);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "weight ({i},{j}) = {v} is not finite and non-negative"
                )));
            }
            if (v - w.get(j, i)).abs() > SYMMETRY_TOL * scale.max(1.0) {
                return Err(Error::InvalidGraph(format!("asymmetric weight at ({i},{j})")));
            }
        }
    }
    let degrees: Vec<f64> = (0..n).map(|i| a.degree(i)).collect();
    if let Some(iso) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::InvalidGraph(format!("node {iso} is isolated")));
    }
    Ok(degrees)
}

/// Symmetric normalized Laplacian as a dense matrix.
pub fn normalized_laplacian(a: &WeightedAdjacency) -> Result<DMatrix<f64>> {
    let degrees = validate(a)?;
    Ok(laplacian_from(a, &degrees))
}

fn laplacian_from(a: &WeightedAdjacency, degrees: &[f64]) -> DMatrix<f64> {
    let n = a.size();
    let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let off = a.weights.get(i, j) * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - off
        } else {
            -off
        }
    })
}

pub fn spectral_embedding(a: &WeightedAdjacency, k: usize) -> Result<SpectralEmbedding> {
    let degrees = validate(a)?;
    let n = a.size();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {k} outside 1..={n}"
        )));
    }
    let lap = laplacian_from(a, &degrees);
    let eigen = SymmetricEigen::try_new(lap, EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        Error::NumericalFailure(format!(
            "symmetric eigensolver did not converge on a {n}x{n} Laplacian in {EIGEN_MAX_ITER} iterations"
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eigen.eigenvalues[x].total_cmp(&eigen.eigenvalues[y]).then(x.cmp(&y)));
    // a repeated k-th eigenvalue is taken whole so the embedding does not
    // depend on the solver's basis for that eigenspace
    let kth = eigen.eigenvalues[order[k - 1]];
    let mut dim = k;
    while dim < n && eigen.eigenvalues[order[dim]] - kth <= EIGENSPACE_TOL {
        dim += 1;
    }
    let chosen = &order[..dim];

    let mut coords = Vec::with_capacity(n * dim);
    for i in 0..n {
        let row: Vec<f64> = chosen.iter().map(|&c| eigen.eigenvectors[(i, c)]).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "spectral row {i} has norm {norm}"
            )));
        }
        coords.extend(row.iter().map(|v| v / norm));
    }
    Ok(SpectralEmbedding {
        coordinates: FeatureMatrix::new(n, dim, coords)?,
        eigenvalues: chosen.iter().map(|&c| eigen.eigenvalues[c]).collect(),
    })
}

/// Partitions the graph into exactly `n_clusters` non-empty groups.
///
/// Cluster ids are numbered by first appearance in node order.
pub fn normalized_cut(a: &WeightedAdjacency, n_clusters: usize, seed: u64) -> Result<SpectralClustering> {
    let n = a.size();
    if n_clusters < 2 || n_clusters > n {
        return Err(Error::InvalidArgument(format!(
            "cannot cut {n} nodes into {n_clusters} clusters (need 2..={n})"
        )));
    }
    let embedding = spectral_embedding(a, n_clusters)?;
    let sub: SubClustering = kmeans(&embedding.coordinates, n_clusters, seed)?;
    Ok(SpectralClustering {
        partition: Partition::canonical(&sub.assignments)?,
        embedding,
    })
}

/// `sum_k cut(S_k, rest) / vol(S_k)` for a given partition.
pub fn normalized_cut_value(a: &WeightedAdjacency, partition: &Partition) -> f64 {
    let n = a.size();
    let k = partition.n_clusters();
    let mut cut = vec![0.0; k];
    let mut vol = vec![0.0; k];
    for i in 0..n {
        let li = partition.label(i);
        for j in 0..n {
            let w = a.weights.get(i, j);
            vol[li] += w;
            if partition.label(j) != li {
                cut[li] += w;
            }
        }
    }
    cut.iter()
        .zip(&vol)
        .map(|(c, v)| if *v > 0.0 { c / v } else { 0.0 })
        .sum()
}
