//! JSON document for a built hierarchy. Field names are stable; see
//! `docs/formats.md`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::metrics::LevelMetrics;
use crate::partition::Partition;
use crate::pipeline::{CoarseGraph, Hierarchy};
use crate::vknng::WeightedAdjacency;

pub const FORMAT_NAME: &str = "mscluster-hierarchy";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelDoc {
    level: usize,
    n_clusters: usize,
    labels: Partition,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    level: usize,
    distances: SquareMatrix,
    adjacency: SquareMatrix,
    sigma: Option<f64>,
    degenerate: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HierarchyDoc {
    format: String,
    version: u32,
    seed: u64,
    n_nodes: usize,
    schedule: Vec<usize>,
    levels: Vec<LevelDoc>,
    parent_maps: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    graphs: Vec<GraphDoc>,
}

/// Pretty-printed JSON; identical hierarchies give identical bytes.
pub fn hierarchy_to_json(h: &Hierarchy, include_matrices: bool) -> String {
    let doc = HierarchyDoc {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        seed: h.seed,
        n_nodes: h.levels.first().map_or(0, Partition::n_nodes),
        schedule: h.schedule.clone(),
        levels: h
            .levels
            .iter()
            .enumerate()
            .map(|(level, p)| LevelDoc {
                level,
                n_clusters: p.n_clusters(),
                labels: p.clone(),
            })
            .collect(),
        parent_maps: h.parent_maps.clone(),
        graphs: if include_matrices {
            h.graphs
                .iter()
                .enumerate()
                .map(|(level, g)| GraphDoc {
                    level,
                    distances: g.distances.clone(),
                    adjacency: g.adjacency.weights.clone(),
                    sigma: g.adjacency.sigma,
                    degenerate: g.adjacency.degenerate,
                })
                .collect()
        } else {
            Vec::new()
        },
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("hierarchy serializes");
    s.push('\n');
    s
}

/// Parses and validates a hierarchy document (nesting is re-checked).
pub fn hierarchy_from_json(text: &str) -> Result<Hierarchy> {
    let doc: HierarchyDoc =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("hierarchy document: {e}")))?;
    if doc.format != FORMAT_NAME || doc.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "expected {FORMAT_NAME} v{FORMAT_VERSION}, got {} v{}",
            doc.format, doc.version
        )));
    }
    if doc.levels.iter().any(|l| l.labels.n_nodes() != doc.n_nodes) {
        return Err(Error::Format("level label arrays differ in length".into()));
    }
    let graphs = doc
        .graphs
        .into_iter()
        .map(|g| {
            let mut adjacency = WeightedAdjacency::from_weights(g.adjacency)?;
            adjacency.sigma = g.sigma;
            adjacency.degenerate = g.degenerate;
            Ok(CoarseGraph {
                distances: g.distances,
                adjacency,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let h = Hierarchy {
        schedule: doc.schedule,
        levels: doc.levels.into_iter().map(|l| l.labels).collect(),
        parent_maps: doc.parent_maps,
        graphs,
        seed: doc.seed,
    };
    if h.levels.len() != h.schedule.len() || h.parent_maps.len() + 1 != h.levels.len() {
        return Err(Error::Format("schedule, levels and parent maps disagree in length".into()));
    }
    h.check_nesting()?;
    Ok(h)
}

pub fn metrics_to_json(rows: &[LevelMetrics]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("metrics serialize");
    s.push('\n');
    s
}
