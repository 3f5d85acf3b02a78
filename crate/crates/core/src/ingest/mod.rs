//! Front-ends that turn images and point clouds into node features and
//! level-0 partitions.

mod image_io;
mod ply;
mod slic;
mod text;

pub use image_io::{label_palette, load_image, render_labels, save_image, write_label_image};
pub use ply::{load_pointcloud, read_ply, write_labeled_pointcloud, write_ply, PlyEncoding};
pub use slic::{slic, SlicColorSpace, SlicParams};
pub use text::{
    load_features, load_label_map, parse_features, parse_label_map, save_features, save_label_map,
    write_features, write_label_map,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::kmeans;
use crate::matrix::FeatureMatrix;
use crate::partition::Partition;

/// 8-bit RGB raster, row-major from the top-left pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    /// Per-pixel `[R, G, B]` as a feature matrix.
    pub fn colors(&self) -> FeatureMatrix {
        let values = self
            .pixels
            .iter()
            .flat_map(|p| p.iter().map(|&c| c as f64))
            .collect();
        FeatureMatrix::new(self.pixel_count(), 3, values).expect("image is non-empty")
    }
}

/// Per-pixel `[R, G, B]`, followed by `spatial_weight * (x, y)` when the weight is non-zero.
pub fn image_features(image: &ImageGrid, spatial_weight: f64) -> Result<FeatureMatrix> {
    if !spatial_weight.is_finite() || spatial_weight < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "spatial weight {spatial_weight} must be finite and non-negative"
        )));
    }
    if spatial_weight == 0.0 {
        return Ok(image.colors());
    }
    let mut values = Vec::with_capacity(image.pixel_count() * 5);
    for y in 0..image.height() {
        for x in 0..image.width() {
            let p = image.pixel(x, y);
            values.extend(p.iter().map(|&c| c as f64));
            values.push(spatial_weight * x as f64);
            values.push(spatial_weight * y as f64);
        }
    }
    FeatureMatrix::new(image.pixel_count(), 5, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<[f64; 3]>,
    colors: Option<Vec<[u8; 3]>>,
}

impl PointCloud {
    pub fn new(positions: Vec<[f64; 3]>, colors: Option<Vec<[u8; 3]>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("point cloud has no points".into()));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite point coordinate".into()));
        }
        if let Some(c) = &colors {
            if c.len() != positions.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} colors for {} points",
                    c.len(),
                    positions.len()
                )));
            }
        }
        Ok(Self { positions, colors })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn color_matrix(&self) -> Option<FeatureMatrix> {
        self.colors.as_ref().map(|c| {
            let values = c.iter().flat_map(|p| p.iter().map(|&v| v as f64)).collect();
            FeatureMatrix::new(c.len(), 3, values).expect("cloud is non-empty")
        })
    }
}

/// Centering and scale applied to one feature block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockNormalization {
    pub name: String,
    pub means: Vec<f64>,
    /// Root-mean-square of the per-column standard deviations (1 if the block is constant).
    pub scale: f64,
}

/// `[x, y, z]` and, when requested and present, `[R, G, B]`; each block is
/// centered per column and divided by one block-wide scale so geometry keeps
/// its aspect ratio.
pub fn pointcloud_features(
    cloud: &PointCloud,
    use_colors: bool,
) -> Result<(FeatureMatrix, Vec<BlockNormalization>)> {
    let mut blocks: Vec<(String, Vec<[f64; 3]>)> = vec![("xyz".into(), cloud.positions.clone())];
    if use_colors {
        if let Some(c) = &cloud.colors {
            blocks.push((
                "rgb".into(),
                c.iter().map(|p| p.map(|v| v as f64)).collect(),
            ));
        }
    }
    let n = cloud.len();
    let mut norms = Vec::new();
    let mut normalized_blocks = Vec::new();
    for (name, block) in blocks {
        let means: Vec<f64> = (0..3)
            .map(|c| block.iter().map(|p| p[c]).sum::<f64>() / n as f64)
            .collect();
        let mean_var = (0..3)
            .map(|c| block.iter().map(|p| (p[c] - means[c]).powi(2)).sum::<f64>() / n as f64)
            .sum::<f64>()
            / 3.0;
        let scale = if mean_var > 0.0 { mean_var.sqrt() } else { 1.0 };
        normalized_blocks.push(
            block
                .iter()
                .map(|p| [0, 1, 2].map(|c| (p[c] - means[c]) / scale))
                .collect::<Vec<_>>(),
        );
        norms.push(BlockNormalization { name, means, scale });
    }
    let dim = 3 * normalized_blocks.len();
    let mut values = Vec::with_capacity(n * dim);
    for i in 0..n {
        for b in &normalized_blocks {
            values.extend_from_slice(&b[i]);
        }
    }
    Ok((FeatureMatrix::new(n, dim, values)?, norms))
}

/// k-means over normalized point features as the level-0 clustering.
pub fn initial_partition_pointcloud(
    features: &FeatureMatrix,
    n_clusters: usize,
    seed: u64,
) -> Result<Partition> {
    let sub = kmeans(features, n_clusters, seed)?;
    Partition::canonical(&sub.assignments)
}
