//! Multiscale clustering of images and point clouds.
//!
//! Each level summarizes every cluster by a small weighted point set, compares
//! clusters by optimal transport, links them in a variable k-nearest-neighbor
//! graph and splits that graph with a normalized cut. Levels nest by
//! construction.

pub mod error;
pub mod export;
pub mod features;
pub mod ingest;
pub mod matrix;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod spectral;
pub mod transport;
pub mod vknng;

pub use error::{Error, ErrorKind, Result};
pub use features::{ClusterSignature, Representative, SubClustering, SubclusterPolicy};
pub use matrix::{FeatureMatrix, SquareMatrix};
pub use partition::Partition;
pub use pipeline::{build_hierarchy, coarsen_one_level, CoarseGraph, Hierarchy, LevelStep, PipelineConfig};
pub use transport::{DistanceMatrix, OtSolution, TransportPlan};
pub use vknng::{AdjacencyConfig, AlphaPolicy, NeighborhoodThresholds, SimilarityKernel, WeightMode, WeightedAdjacency};
