//! Level-by-level coarsening of an initial partition into a hierarchy.
//!
//! One level: summarize every cluster by its signature, compare all pairs with
//! exact OT, build the variable-k neighbor graph over clusters, and cut it into
//! the next level's cluster count. Node labels at the next level are the old
//! labels sent through the parent map, so coarse clusters are always unions of
//! fine ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_signature, ClusterSignature, SubclusterPolicy};
use crate::matrix::FeatureMatrix;
use crate::partition::Partition;
use crate::spectral::normalized_cut;
use crate::transport::{pairwise_distances, DistanceMatrix};
use crate::vknng::{build_adjacency, compute_alphas, AdjacencyConfig, AlphaPolicy, WeightedAdjacency};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub subclusters: SubclusterPolicy,
    #[serde(default)]
    pub alpha: AlphaPolicy,
    #[serde(default)]
    pub adjacency: AdjacencyConfig,
}

/// Everything produced while going from level `l` to `l + 1`.
#[derive(Debug, Clone)]
pub struct LevelStep {
    pub partition: Partition,
    /// Level-`l` cluster id -> level-`l+1` cluster id.
    pub parent_map: Vec<usize>,
    pub signatures: Vec<ClusterSignature>,
    pub distances: DistanceMatrix,
    pub adjacency: WeightedAdjacency,
}

/// The coarse graph `G^(l)` built during one coarsening step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseGraph {
    pub distances: DistanceMatrix,
    pub adjacency: WeightedAdjacency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    /// `N^(0), ..., N^(L)`.
    pub schedule: Vec<usize>,
    /// Node-level partitions for levels `0..=L`.
    pub levels: Vec<Partition>,
    /// `parent_maps[l]` sends level-`l` clusters to level-`l+1` clusters.
    pub parent_maps: Vec<Vec<usize>>,
    /// `graphs[l]` is the graph over level-`l` clusters used to build level `l+1`.
    pub graphs: Vec<CoarseGraph>,
    pub seed: u64,
}

impl Hierarchy {
    pub fn depth(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Checks counts, parent-map totality and exact nesting across all levels.
    pub fn check_nesting(&self) -> Result<()> {
        for (l, p) in self.levels.iter().enumerate() {
            if p.n_clusters() != self.schedule[l] {
                return Err(Error::InvalidSchedule(format!(
                    "level {l} has {} clusters, schedule says {}",
                    p.n_clusters(),
                    self.schedule[l]
                )));
            }
        }
        for (l, map) in self.parent_maps.iter().enumerate() {
            let (fine, coarse) = (&self.levels[l], &self.levels[l + 1]);
            if map.len() != fine.n_clusters() || map.iter().any(|&c| c >= coarse.n_clusters()) {
                return Err(Error::InvalidData(format!("parent map {l} is not total")));
            }
            if let Some(node) = (0..fine.n_nodes()).find(|&m| coarse.label(m) != map[fine.label(m)]) {
                return Err(Error::InvalidData(format!(
                    "node {node} breaks nesting between levels {l} and {}",
                    l + 1
                )));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; derives independent stage seeds from one master seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

const STAGE_SIGNATURE: u64 = 1;
const STAGE_CUT: u64 = 2;

/// Geometric interpolation from `n0` down to `n_final` over `levels` steps,
/// rounded and forced strictly decreasing. Returns `N^(1..=L)`.
pub fn geometric_schedule(n0: usize, n_final: usize, levels: usize) -> Result<Vec<usize>> {
    if levels == 0 {
        return Err(Error::InvalidSchedule("need at least one level".into()));
    }
    if n_final < 2 {
        return Err(Error::InvalidSchedule(format!(
            "final cluster count {n_final} must be at least 2"
        )));
    }
    if n0 < n_final + levels {
        return Err(Error::InvalidSchedule(format!(
            "cannot descend from {n0} to {n_final} clusters in {levels} strictly decreasing steps"
        )));
    }
    let ratio = (n_final as f64 / n0 as f64).powf(1.0 / levels as f64);
    let mut out: Vec<usize> = (1..=levels)
        .map(|l| (n0 as f64 * ratio.powi(l as i32)).round() as usize)
        .collect();
    out[levels - 1] = n_final;
    // Enforce n0 > out[0] > ... > out[L-1] = n_final with room left for later steps.
    for l in (0..levels - 1).rev() {
        out[l] = out[l].max(out[l + 1] + 1);
    }
    let mut prev = n0;
    for (l, v) in out.iter_mut().enumerate() {
        let room = n_final + (levels - 1 - l);
        *v = (*v).min(prev - 1).max(room);
        prev = *v;
    }
    Ok(out)
}

fn validate_schedule(n0: usize, schedule: &[usize]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidSchedule("schedule is empty".into()));
    }
    let mut prev = n0;
    for (l, &n) in schedule.iter().enumerate() {
        if n >= prev {
            return Err(Error::InvalidSchedule(format!(
                "N^({}) = {n} is not below N^({l}) = {prev}",
                l + 1
            )));
        }
        if n < 2 {
            return Err(Error::InvalidSchedule(format!(
                "N^({}) = {n}; every level needs at least 2 clusters",
                l + 1
            )));
        }
        prev = n;
    }
    Ok(())
}

/// Merges the clusters of `partition` into `n_next` coarser clusters.
pub fn coarsen_one_level(
    partition: &Partition,
    features: &FeatureMatrix,
    n_next: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<LevelStep> {
    let n_now = partition.n_clusters();
    if n_next >= n_now || n_next < 2 {
        return Err(Error::InvalidSchedule(format!(
            "cannot coarsen {n_now} clusters into {n_next} (need 2 <= next < current)"
        )));
    }
    if features.rows() != partition.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows for {} nodes",
            features.rows(),
            partition.n_nodes()
        )));
    }

    let members = partition.members();
    let signatures = members
        .par_iter()
        .enumerate()
        .map(|(j, nodes)| {
            extract_signature(
                nodes,
                features,
                &config.subclusters,
                derive_seed(seed, &[STAGE_SIGNATURE, j as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("feature extraction"))?;

    let distances = pairwise_distances(&signatures).map_err(|e| e.in_stage("optimal transport"))?;
    let adjacency = compute_alphas(&distances, config.alpha)
        .and_then(|alpha| build_adjacency(&distances, &alpha, &config.adjacency))
        .map_err(|e| e.in_stage("graph construction"))?;
    let cut = normalized_cut(&adjacency, n_next, derive_seed(seed, &[STAGE_CUT]))
        .map_err(|e| e.in_stage("spectral clustering"))?;

    let parent_map = cut.partition.labels().to_vec();
    let next = partition.compose(&parent_map)?;
    Ok(LevelStep {
        partition: next,
        parent_map,
        signatures,
        distances,
        adjacency,
    })
}

/// Runs [`coarsen_one_level`] once per entry of `schedule` (`N^(1..=L)`).
pub fn build_hierarchy(
    initial: &Partition,
    features: &FeatureMatrix,
    schedule: &[usize],
    config: &PipelineConfig,
    seed: u64,
) -> Result<Hierarchy> {
    validate_schedule(initial.n_clusters(), schedule)?;
    let mut levels = vec![initial.clone()];
    let mut parent_maps = Vec::with_capacity(schedule.len());
    let mut graphs = Vec::with_capacity(schedule.len());
    for (l, &n_next) in schedule.iter().enumerate() {
        let step = coarsen_one_level(
            &levels[l],
            features,
            n_next,
            config,
            derive_seed(seed, &[l as u64]),
        )
        .map_err(|e| e.at_level(l))?;
        parent_maps.push(step.parent_map);
        graphs.push(CoarseGraph {
            distances: step.distances,
            adjacency: step.adjacency,
        });
        levels.push(step.partition);
    }
    let mut full = vec![initial.n_clusters()];
    full.extend_from_slice(schedule);
    Ok(Hierarchy {
        schedule: full,
        levels,
        parent_maps,
        graphs,
        seed,
    })
}
