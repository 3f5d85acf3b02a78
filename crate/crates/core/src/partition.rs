use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of every node to exactly one cluster.
///
/// Cluster ids are dense: `0..n_clusters`, each id used by at least one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Partition {
    /// Validates labels that are already dense.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("partition has no nodes".into()));
        }
        let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
        let mut used = vec![false; n_clusters];
        for &l in &labels {
            used[l] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::InvalidData(format!(
                "cluster id {missing} is empty; labels must be dense"
            )));
        }
        Ok(Self { labels, n_clusters })
    }

    /// Relabels arbitrary integer ids to `0..n` in ascending id order.
    pub fn from_raw_labels(raw: &[i64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidArgument("partition has no nodes".into()));
        }
        let mut ids: BTreeMap<i64, usize> = raw.iter().map(|&r| (r, 0)).collect();
        for (dense, v) in ids.values_mut().enumerate() {
            *v = dense;
        }
        Self::new(raw.iter().map(|r| ids[r]).collect())
    }

    /// Relabels so that clusters are numbered by first appearance.
    pub fn canonical(labels: &[usize]) -> Result<Self> {
        let mut map = BTreeMap::new();
        let canon = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self::new(canon)
    }

    pub fn single(n_nodes: usize) -> Result<Self> {
        Self::new(vec![0; n_nodes])
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Member node indices per cluster, each list ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (node, &l) in self.labels.iter().enumerate() {
            out[l].push(node);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_clusters];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }

    /// Node-level labels obtained by sending each cluster through `parent`.
    pub fn compose(&self, parent: &[usize]) -> Result<Self> {
        if parent.len() != self.n_clusters {
            return Err(Error::InvalidArgument(format!(
                "parent map covers {} clusters, partition has {}",
                parent.len(),
                self.n_clusters
            )));
        }
        Self::new(self.labels.iter().map(|&l| parent[l]).collect())
    }

    /// True when every cluster of `self` lies inside a single cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n_nodes() != coarser.n_nodes() {
            return false;
        }
        let mut parent = vec![usize::MAX; self.n_clusters];
        for (&fine, &coarse) in self.labels.iter().zip(&coarser.labels) {
            if parent[fine] == usize::MAX {
                parent[fine] = coarse;
            } else if parent[fine] != coarse {
                return false;
            }
        }
        true
    }

    /// Same grouping of nodes, ignoring cluster ids.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.n_clusters == other.n_clusters && self.refines(other) && other.refines(self)
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}
