//! Synthetic inputs shared by the benchmarks.

use mscluster::ingest::ImageGrid;
use mscluster::{ClusterSignature, FeatureMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_points(rows: usize, dim: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..rows * dim).map(|_| rng.random::<f64>()).collect();
    FeatureMatrix::new(rows, dim, values).expect("finite")
}

pub fn random_signature(k: usize, dim: usize, seed: u64) -> ClusterSignature {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids = (0..k)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    ClusterSignature::new(centroids, raw.iter().map(|m| m / total).collect()).expect("valid")
}

/// Blocky test image with mild noise.
pub fn blocky_image(width: usize, height: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [[200u8, 40, 40], [40, 180, 60], [50, 60, 200], [220, 210, 60]];
    ImageGrid::from_fn(width, height, |x, y| {
        let c = base[(x * 4 / width + 2 * (y * 2 / height)) % 4];
        c.map(|v| v.saturating_add(rng.random_range(0..12)))
    })
    .expect("non-empty")
}
