//! Variable-k nearest-neighbor graph over clusters.
//!
//! For node `i` the indicator `a` minimizing `sum_j a_j * (z_ij - alpha_i)`
//! keeps exactly the candidates with `z_ij < alpha_i`. Ties (`z_ij == alpha_i`)
//! contribute nothing to the objective and are left out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::transport::DistanceMatrix;

/// Per-node neighborhood thresholds `alpha_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodThresholds(Vec<f64>);

impl NeighborhoodThresholds {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidData(
                "thresholds must be finite and non-negative".into(),
            ));
        }
        Ok(Self(alpha))
    }

    pub fn uniform(alpha: f64, n: usize) -> Result<Self> {
        Self::new(vec![alpha; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Nodes `j != self_index` whose distance is strictly below `alpha`.
pub fn select_neighbors(row: &[f64], self_index: usize, alpha: f64) -> Result<Vec<bool>> {
    if let Some(bad) = row.iter().position(|z| !z.is_finite() || *z < 0.0) {
        return Err(Error::InvalidData(format!(
            "distance {} at column {bad} is not a finite non-negative value",
            row[bad]
        )));
    }
    Ok(row
        .iter()
        .enumerate()
        .map(|(j, &z)| j != self_index && z < alpha)
        .collect())
}

/// Rule for choosing `alpha_i` from a node's distance row.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AlphaPolicy {
    /// `alpha_i` = the m-th smallest off-diagonal distance, `m = ceil(log2 N) + 1`.
    #[default]
    OrderStatistic,
    /// Threshold halfway between the k-th and (k+1)-th smallest distances,
    /// so exactly `k` neighbors pass when those two differ.
    FixedK { k: usize },
    /// Mean of the off-diagonal distances of the row.
    MeanDistance,
}

fn sorted_off_diagonal(z: &DistanceMatrix, i: usize) -> Vec<f64> {
    let mut row: Vec<f64> = z
        .row(i)
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .collect();
    row.sort_by(f64::total_cmp);
    row
}

/// `ceil(log2 n) + 1`, clamped to `[1, n - 1]`.
pub fn default_order(n: usize) -> usize {
    let log = if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    } as usize;
    (log + 1).clamp(1, n.saturating_sub(1).max(1))
}

pub fn compute_alphas(z: &DistanceMatrix, policy: AlphaPolicy) -> Result<NeighborhoodThresholds> {
    let n = z.size();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 nodes to choose neighborhoods, got {n}"
        )));
    }
    if z.as_slice().iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidData("distances must be finite and non-negative".into()));
    }
    let alpha = (0..n)
        .map(|i| {
            let row = sorted_off_diagonal(z, i);
            match policy {
                AlphaPolicy::OrderStatistic => Ok(row[default_order(n) - 1]),
                AlphaPolicy::FixedK { k } => {
                    if k == 0 || k > n - 1 {
                        return Err(Error::InvalidArgument(format!(
                            "fixed k = {k} outside 1..={}",
                            n - 1
                        )));
                    }
                    Ok(if k == n - 1 {
                        row[k - 1] + row[k - 1].max(1.0)
                    } else {
                        0.5 * (row[k - 1] + row[k])
                    })
                }
                AlphaPolicy::MeanDistance => Ok(row.iter().sum::<f64>() / row.len() as f64),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    NeighborhoodThresholds::new(alpha)
}

/// Distance-to-weight conversion for selected edges.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SimilarityKernel {
    /// `exp(-z^2 / (2 sigma^2))`; `sigma` defaults to the median selected distance.
    #[default]
    Gaussian,
    GaussianFixed { sigma: f64 },
    /// Weight 1 on every selected edge.
    Binary,
}

/// Whether edges carry similarities or the raw distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    #[default]
    Kernel,
    /// `A = A_uw ∘ Z`: edges weighted by distance, kept for fidelity experiments.
    LiteralDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacencyConfig {
    #[serde(default)]
    pub kernel: SimilarityKernel,
    #[serde(default)]
    pub weight_mode: WeightMode,
}

/// Symmetric, non-negative, zero-diagonal edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedAdjacency {
    pub weights: SquareMatrix,
    /// Kernel bandwidth actually used, if a Gaussian kernel was applied.
    pub sigma: Option<f64>,
    /// Set when the bandwidth collapsed and uniform weights were substituted.
    pub degenerate: bool,
}

impl WeightedAdjacency {
    /// Validates an externally supplied weight matrix.
    pub fn from_weights(weights: SquareMatrix) -> Result<Self> {
        let n = weights.size();
        for i in 0..n {
            if weights.get(i, i) != 0.0 {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let w = weights.get(i, j);
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "weight ({i},{j}) = {w} is not finite and non-negative"
                    )));
                }
                if w != weights.get(j, i) {
                    return Err(Error::InvalidGraph(format!("asymmetric weight at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            weights,
            sigma: None,
            degenerate: false,
        })
    }

    pub fn size(&self) -> usize {
        self.weights.size()
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.weights.row(i).iter().sum()
    }

    pub fn neighbor_count(&self, i: usize) -> usize {
        self.weights.row(i).iter().filter(|&&w| w > 0.0).count()
    }
}

/// Undirected edge set chosen by the thresholds, symmetrized by OR, with a
/// nearest-neighbor edge added for any node that selected nothing.
pub fn selected_edges(z: &DistanceMatrix, thresholds: &NeighborhoodThresholds) -> Result<Vec<Vec<bool>>> {
    let n = z.size();
    if thresholds.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} thresholds for {n} nodes",
            thresholds.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("graph needs at least 2 nodes".into()));
    }
    let mut edges = vec![vec![false; n]; n];
    for i in 0..n {
        let picks = select_neighbors(z.row(i), i, thresholds.as_slice()[i])?;
        let mut any = false;
        for (j, picked) in picks.into_iter().enumerate() {
            if picked {
                edges[i][j] = true;
                edges[j][i] = true;
                any = true;
            }
        }
        if !any {
            let nearest = (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| z.get(i, a).total_cmp(&z.get(i, b)))
                .expect("n >= 2");
            edges[i][nearest] = true;
            edges[nearest][i] = true;
        }
    }
    Ok(edges)
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

pub fn build_adjacency(
    z: &DistanceMatrix,
    thresholds: &NeighborhoodThresholds,
    config: &AdjacencyConfig,
) -> Result<WeightedAdjacency> {
    let n = z.size();
    let edges = selected_edges(z, thresholds)?;
    // bandwidth comes from threshold-selected edges only, not fallback ones
    let alpha = thresholds.as_slice();
    let edge_distances: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            let d = z.get(i, j);
            edges[i][j] && (d < alpha[i] || d < alpha[j])
        })
        .map(|(i, j)| z.get(i, j))
        .collect();

    let mut sigma = None;
    let mut degenerate = false;
    let weight: Box<dyn Fn(f64) -> f64> = match (config.weight_mode, config.kernel) {
        (WeightMode::LiteralDistance, _) => Box::new(|d: f64| d.max(f64::MIN_POSITIVE)),
        (WeightMode::Kernel, SimilarityKernel::Binary) => Box::new(|_| 1.0),
        (WeightMode::Kernel, kernel) => {
            let bandwidth = match kernel {
                SimilarityKernel::GaussianFixed { sigma } => {
                    if !sigma.is_finite() || sigma < 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "kernel bandwidth {sigma} must be finite and non-negative"
                        )));
                    }
                    sigma
                }
                _ => median(edge_distances.clone())
                    .filter(|&m| m > 0.0)
                    .or_else(|| median(edge_distances.iter().copied().filter(|&d| d > 0.0).collect()))
                    .unwrap_or(0.0),
            };
            if bandwidth > 0.0 {
                sigma = Some(bandwidth);
                let denom = 2.0 * bandwidth * bandwidth;
                // floored so far-but-selected edges never vanish through underflow
                Box::new(move |d| (-(d * d) / denom).exp().max(f64::MIN_POSITIVE))
            } else {
                degenerate = true;
                Box::new(|_| 1.0)
            }
        }
    };

    let mut weights = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            if edges[i][j] {
                let w = weight(z.get(i, j));
                weights.set(i, j, w);
                weights.set(j, i, w);
            }
        }
    }
    Ok(WeightedAdjacency {
        weights,
        sigma,
        degenerate,
    })
}
