//! Per-cluster feature signatures.
//!
//! Each cluster is split into `K_j` sub-clusters by Lloyd's k-means (k-means++
//! seeding), and the sub-cluster centroids weighted by their share of the
//! cluster's nodes form the cluster's [`ClusterSignature`].

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{squared_distance, FeatureMatrix};

pub const DEFAULT_MAX_ITERATIONS: usize = 300;
pub const DEFAULT_K_MAX: usize = 8;
/// Independent k-means++ starts; the lowest final objective is kept.
pub const DEFAULT_RESTARTS: usize = 10;

/// Result of k-means on one set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct SubClustering {
    /// Sub-cluster index (`0..k`) for every input point.
    pub assignments: Vec<usize>,
    /// Mean of the points assigned to each sub-cluster.
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    /// Within-cluster sum of squares after every centroid update.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl SubClustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

/// Within-cluster sum of squared distances to the sub-cluster means.
///
/// Groups that receive no point contribute nothing.
pub fn kmeans_objective(points: &FeatureMatrix, assignments: &[usize], k: usize) -> f64 {
    let means = group_means(points, assignments, k);
    points
        .iter_rows()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, &means[a]))
        .sum()
}

fn group_means(points: &FeatureMatrix, assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points.dim();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter_rows().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            let inv = c as f64;
            s.iter_mut().for_each(|v| *v /= inv);
        }
    }
    sums
}

/// k-means with the default iteration cap.
pub fn kmeans(points: &FeatureMatrix, k: usize, seed: u64) -> Result<SubClustering> {
    kmeans_with(points, k, seed, DEFAULT_MAX_ITERATIONS)
}

pub fn kmeans_with(
    points: &FeatureMatrix,
    k: usize,
    seed: u64,
    max_iterations: usize,
) -> Result<SubClustering> {
    let n = points.rows();
    if k == 0 {
        return Err(Error::InvalidArgument("k-means needs k >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k-means asked for {k} clusters from {n} points"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<SubClustering> = None;
    for _ in 0..DEFAULT_RESTARTS {
        let run = lloyd(points, k, &mut rng, max_iterations);
        if best.as_ref().is_none_or(|b| run.objective() < b.objective()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn lloyd(points: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng, max_iterations: usize) -> SubClustering {
    let n = points.rows();
    let mut centroids = kmeans_plus_plus(points, k, rng);
    let mut assignments = vec![0usize; n];
    for (i, p) in points.iter_rows().enumerate() {
        assignments[i] = nearest(p, &centroids, None);
    }

    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iterations.max(1) {
        repair_empty(points, &mut assignments, &mut centroids);
        centroids = group_means(points, &assignments, k);
        trace.push(objective_with(points, &assignments, &centroids));
        if !reassign(points, &mut assignments, &centroids) {
            converged = true;
            break;
        }
    }
    if !converged {
        repair_empty(points, &mut assignments, &mut centroids);
        centroids = group_means(points, &assignments, k);
        trace.push(objective_with(points, &assignments, &centroids));
    }
    if k > 1 {
        for _ in 0..max_iterations.max(1) {
            if !hartigan_pass(points, &mut assignments, &mut centroids) {
                break;
            }
            centroids = group_means(points, &assignments, k);
            trace.push(objective_with(points, &assignments, &centroids));
        }
    }

    let mut sizes = vec![0usize; k];
    for &a in &assignments {
        sizes[a] += 1;
    }
    SubClustering {
        assignments,
        centroids,
        sizes,
        objective_trace: trace,
        converged,
    }
}

/// Single-point moves that lower the objective even when the point is
/// already nearest its own mean (Hartigan). Means are updated in place.
fn hartigan_pass(points: &FeatureMatrix, assignments: &mut [usize], centroids: &mut [Vec<f64>]) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let mut moved = false;
    for (i, p) in points.iter_rows().enumerate() {
        let a = assignments[i];
        if sizes[a] < 2 {
            continue;
        }
        let na = sizes[a] as f64;
        let removal = na / (na - 1.0) * squared_distance(p, &centroids[a]);
        let mut best: Option<(usize, f64)> = None;
        for b in (0..k).filter(|&b| b != a) {
            let nb = sizes[b] as f64;
            let add = nb / (nb + 1.0) * squared_distance(p, &centroids[b]);
            if best.is_none_or(|(_, c)| add < c) {
                best = Some((b, add));
            }
        }
        let Some((b, add)) = best else { continue };
        if removal - add <= 1e-12 * (1.0 + removal) {
            continue;
        }
        let nb = sizes[b] as f64;
        for (d, &x) in p.iter().enumerate() {
            centroids[a][d] = (na * centroids[a][d] - x) / (na - 1.0);
            centroids[b][d] = (nb * centroids[b][d] + x) / (nb + 1.0);
        }
        sizes[a] -= 1;
        sizes[b] += 1;
        assignments[i] = b;
        moved = true;
    }
    moved
}

fn objective_with(points: &FeatureMatrix, assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter_rows()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p, &centroids[a]))
        .sum()
}

fn kmeans_plus_plus(points: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.rows();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![points.row(first).to_vec()];
    let mut d2: Vec<f64> = points
        .iter_rows()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();

    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive entry")
        } else {
            // Every remaining point coincides with a center.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = points.row(pick).to_vec();
        for (d, p) in d2.iter_mut().zip(points.iter_rows()) {
            *d = d.min(squared_distance(p, &c));
        }
        centers.push(c);
    }
    centers
}

/// Index of the nearest centroid. `keep` wins ties so stable points do not churn.
fn nearest(p: &[f64], centroids: &[Vec<f64>], keep: Option<usize>) -> usize {
    let mut best = keep.unwrap_or(0);
    let mut best_d = squared_distance(p, &centroids[best]);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn reassign(points: &FeatureMatrix, assignments: &mut [usize], centroids: &[Vec<f64>]) -> bool {
    let mut changed = false;
    for (p, a) in points.iter_rows().zip(assignments.iter_mut()) {
        let next = nearest(p, centroids, Some(*a));
        if next != *a {
            *a = next;
            changed = true;
        }
    }
    changed
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(points: &FeatureMatrix, assignments: &mut [usize], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter_rows().enumerate() {
            let a = assignments[i];
            if sizes[a] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[a]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else { return };
        sizes[assignments[i]] -= 1;
        sizes[empty] = 1;
        assignments[i] = empty;
        centroids[empty] = points.row(i).to_vec();
    }
}

/// How each sub-cluster is represented in the signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representative {
    /// The sub-cluster mean.
    #[default]
    Mean,
    /// The member node whose feature is closest to the mean.
    Medoid,
}

/// Chooses `K_j = min(k_max, |S_j|, distinct feature count)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubclusterPolicy {
    pub k_max: usize,
    #[serde(default)]
    pub representative: Representative,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl Default for SubclusterPolicy {
    fn default() -> Self {
        Self {
            k_max: DEFAULT_K_MAX,
            representative: Representative::Mean,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl SubclusterPolicy {
    pub fn with_k_max(k_max: usize) -> Self {
        Self {
            k_max,
            ..Self::default()
        }
    }

    pub fn subcluster_count(&self, points: &FeatureMatrix) -> usize {
        let cap = self.k_max.max(1).min(points.rows());
        distinct_rows(points, cap)
    }
}

/// Number of distinct rows, counting no further than `cap`.
fn distinct_rows(points: &FeatureMatrix, cap: usize) -> usize {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for row in points.iter_rows() {
        // +0.0 folds -0.0 into 0.0
        seen.insert(row.iter().map(|v| (v + 0.0).to_bits()).collect());
        if seen.len() >= cap {
            return cap;
        }
    }
    seen.len()
}

/// Weighted representative centroids of one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSignature {
    centroids: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl ClusterSignature {
    /// Validates shape and positivity. Mass normalization is checked by the solver.
    pub fn new(centroids: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::InvalidArgument("signature has no centroids".into()));
        }
        if centroids.len() != masses.len() {
            return Err(Error::InvalidArgument(format!(
                "{} centroids but {} masses",
                centroids.len(),
                masses.len()
            )));
        }
        let dim = centroids[0].len();
        if dim == 0 || centroids.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidArgument(
                "signature centroids must share a positive dimension".into(),
            ));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite centroid coordinate".into()));
        }
        if masses.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(Error::InvalidData("signature masses must be positive".into()));
        }
        Ok(Self { centroids, masses })
    }

    /// Uniform masses over the given points.
    pub fn uniform(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let n = centroids.len().max(1) as f64;
        let masses = vec![1.0 / n; centroids.len()];
        Self::new(centroids, masses)
    }

    /// A single atom of unit mass.
    pub fn point(centroid: Vec<f64>) -> Result<Self> {
        Self::new(vec![centroid], vec![1.0])
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.centroids
                .iter()
                .map(|c| c.iter().map(|v| v * factor).collect())
                .collect(),
            self.masses.clone(),
        )
    }
}

/// Builds the signature of the cluster made of `cluster_nodes`.
pub fn extract_signature(
    cluster_nodes: &[usize],
    features: &FeatureMatrix,
    policy: &SubclusterPolicy,
    seed: u64,
) -> Result<ClusterSignature> {
    if cluster_nodes.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty cluster".into()));
    }
    let points = features.select(cluster_nodes)?;
    let k = policy.subcluster_count(&points);
    let sub = kmeans_with(&points, k, seed, policy.max_iterations)?;

    let total = points.rows() as f64;
    let masses = sub.sizes.iter().map(|&s| s as f64 / total).collect();
    let centroids = match policy.representative {
        Representative::Mean => sub.centroids,
        Representative::Medoid => medoids(&points, &sub),
    };
    ClusterSignature::new(centroids, masses)
}

fn medoids(points: &FeatureMatrix, sub: &SubClustering) -> Vec<Vec<f64>> {
    let mut best: Vec<Option<(f64, usize)>> = vec![None; sub.k()];
    for (i, (p, &a)) in points.iter_rows().zip(&sub.assignments).enumerate() {
        let d = squared_distance(p, &sub.centroids[a]);
        if best[a].is_none_or(|(bd, _)| d < bd) {
            best[a] = Some((d, i));
        }
    }
    best.into_iter()
        .map(|b| points.row(b.expect("sub-clusters are non-empty").1).to_vec())
        .collect()
}
