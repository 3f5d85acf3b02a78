//! Boundary-preservation and color-homogeneity scores.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::partition::Partition;

/// `|a ∪ b|` when the sets meet, otherwise 0.
pub fn overlap_cardinality(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> usize {
    if a.is_disjoint(b) {
        0
    } else {
        a.union(b).count()
    }
}

/// Ratio of subclusters within a cluster, evaluated literally:
/// `(1/|S_i|) * sum_j I(S_j^fine, S_i^coarse)`.
pub fn rsc(fine: &Partition, coarse_cluster: &BTreeSet<usize>) -> Result<f64> {
    rsc_terms(fine, coarse_cluster).map(|(total, _)| total as f64 / coarse_cluster.len() as f64)
}

/// Literal RSC divided by the number of fine clusters the coarse cluster meets.
pub fn rsc_normalized(fine: &Partition, coarse_cluster: &BTreeSet<usize>) -> Result<f64> {
    rsc_terms(fine, coarse_cluster)
        .map(|(total, hits)| total as f64 / coarse_cluster.len() as f64 / hits as f64)
}

/// `(sum of overlap cardinalities, number of overlapping fine clusters)`.
fn rsc_terms(fine: &Partition, coarse_cluster: &BTreeSet<usize>) -> Result<(usize, usize)> {
    if coarse_cluster.is_empty() {
        return Err(Error::InvalidArgument("RSC of an empty cluster".into()));
    }
    if let Some(&bad) = coarse_cluster.iter().find(|&&m| m >= fine.n_nodes()) {
        return Err(Error::InvalidArgument(format!(
            "node {bad} not covered by the fine partition"
        )));
    }
    let mut total = 0;
    let mut hits = 0;
    for members in fine.members() {
        let set: BTreeSet<usize> = members.into_iter().collect();
        let c = overlap_cardinality(&set, coarse_cluster);
        if c > 0 {
            hits += 1;
            total += c;
        }
    }
    Ok((total, hits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscReport {
    /// Literal RSC per coarse cluster.
    pub values: Vec<f64>,
    /// RSC divided by the number of overlapping fine clusters (1 under perfect nesting).
    pub normalized: Vec<f64>,
    pub mean: f64,
    pub normalized_mean: f64,
}

/// RSC of every cluster of `coarse` against `fine`.
pub fn rsc_report(fine: &Partition, coarse: &Partition) -> Result<RscReport> {
    if fine.n_nodes() != coarse.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "partitions cover {} and {} nodes",
            fine.n_nodes(),
            coarse.n_nodes()
        )));
    }
    let mut values = Vec::with_capacity(coarse.n_clusters());
    let mut normalized = Vec::with_capacity(coarse.n_clusters());
    for members in coarse.members() {
        let set: BTreeSet<usize> = members.into_iter().collect();
        let (total, hits) = rsc_terms(fine, &set)?;
        let v = total as f64 / set.len() as f64;
        values.push(v);
        normalized.push(v / hits as f64);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let normalized_mean = normalized.iter().sum::<f64>() / normalized.len() as f64;
    Ok(RscReport {
        values,
        normalized,
        mean,
        normalized_mean,
    })
}

/// Mean over clusters of the channel-averaged population standard deviation.
pub fn clusterwise_color_std(partition: &Partition, colors: &FeatureMatrix) -> Result<f64> {
    if colors.rows() != partition.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "{} color rows for {} nodes",
            colors.rows(),
            partition.n_nodes()
        )));
    }
    let per_cluster = cluster_color_stds(partition, colors);
    if per_cluster.is_empty() {
        return Err(Error::InvalidArgument("partition has no clusters".into()));
    }
    Ok(per_cluster.iter().sum::<f64>() / per_cluster.len() as f64)
}

fn cluster_color_stds(partition: &Partition, colors: &FeatureMatrix) -> Vec<f64> {
    let dim = colors.dim();
    partition
        .members()
        .iter()
        .map(|nodes| {
            let n = nodes.len() as f64;
            (0..dim)
                .map(|c| {
                    let mean = nodes.iter().map(|&m| colors.row(m)[c]).sum::<f64>() / n;
                    let var = nodes
                        .iter()
                        .map(|&m| (colors.row(m)[c] - mean).powi(2))
                        .sum::<f64>()
                        / n;
                    var.sqrt()
                })
                .sum::<f64>()
                / dim as f64
        })
        .collect()
}

/// Per-level summary written to the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub level: usize,
    pub n_clusters: usize,
    /// RSC of this level's clusters against the level below (absent at level 0).
    pub rsc: Option<RscReport>,
    pub color_std: Option<f64>,
}

pub fn hierarchy_metrics(levels: &[Partition], colors: Option<&FeatureMatrix>) -> Result<Vec<LevelMetrics>> {
    levels
        .iter()
        .enumerate()
        .map(|(l, p)| {
            let rsc = if l == 0 {
                None
            } else {
                Some(rsc_report(&levels[l - 1], p)?)
            };
            let color_std = colors.map(|c| clusterwise_color_std(p, c)).transpose()?;
            Ok(LevelMetrics {
                level: l,
                n_clusters: p.n_clusters(),
                rsc,
                color_std,
            })
        })
        .collect()
}

/// CSV with header `level,n_clusters,rsc_mean,rsc_normalized_mean,color_std`.
pub fn metrics_csv(rows: &[LevelMetrics]) -> String {
    let mut out = String::from("level,n_clusters,rsc_mean,rsc_normalized_mean,color_std\n");
    for r in rows {
        let (m, nm) = r
            .rsc
            .as_ref()
            .map_or((String::new(), String::new()), |x| {
                (x.mean.to_string(), x.normalized_mean.to_string())
            });
        let cs = r.color_std.map_or(String::new(), |v| v.to_string());
        out.push_str(&format!("{},{},{m},{nm},{cs}\n", r.level, r.n_clusters));
    }
    out
}
