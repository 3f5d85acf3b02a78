#![allow(dead_code)]

use mscluster::ingest::ImageGrid;
use mscluster::{ClusterSignature, Partition, SquareMatrix, WeightedAdjacency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum assignment cost between equal-size uniform signatures.
pub fn brute_force_ot(a: &ClusterSignature, b: &ClusterSignature) -> f64 {
    let n = a.len();
    assert_eq!(n, b.len());
    let cost = |i: usize, j: usize| -> f64 {
        a.centroids()[i]
            .iter()
            .zip(&b.centroids()[j])
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };
    permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

pub fn random_uniform_signature(r: &mut ChaCha8Rng, k: usize, dim: usize) -> ClusterSignature {
    let c = (0..k)
        .map(|_| (0..dim).map(|_| r.random_range(-5.0..5.0)).collect())
        .collect();
    ClusterSignature::uniform(c).unwrap()
}

/// Exhaustive minimizer of `sum_j a_j (z_j - alpha)` over all indicator
/// vectors with the self entry held at 0; among minimizers the one with the
/// fewest ones wins.
pub fn brute_force_selection(row: &[f64], self_index: usize, alpha: f64) -> Vec<bool> {
    let n = row.len();
    let mut best: Option<(f64, u32, u32)> = None;
    for mask in 0u32..(1 << n) {
        if self_index < n && mask & (1 << self_index) != 0 {
            continue;
        }
        let obj: f64 = (0..n)
            .filter(|&j| mask & (1 << j) != 0)
            .map(|j| row[j] - alpha)
            .sum();
        let ones = mask.count_ones();
        let better = match best {
            None => true,
            Some((bo, bones, _)) => obj < bo || (obj == bo && ones < bones),
        };
        if better {
            best = Some((obj, ones, mask));
        }
    }
    let mask = best.unwrap().2;
    (0..n).map(|j| mask & (1 << j) != 0).collect()
}

pub fn ncut(a: &SquareMatrix, labels: &[usize], k: usize) -> f64 {
    let n = a.size();
    let mut total = 0.0;
    for c in 0..k {
        let (mut cut, mut vol) = (0.0, 0.0);
        for i in (0..n).filter(|&i| labels[i] == c) {
            for j in 0..n {
                vol += a.get(i, j);
                if labels[j] != c {
                    cut += a.get(i, j);
                }
            }
        }
        total += cut / vol;
    }
    total
}

/// Best bipartition by exhaustive search (node 0 fixed on side 0).
pub fn brute_force_bipartition(a: &SquareMatrix) -> (Vec<usize>, f64) {
    let n = a.size();
    let mut best = (Vec::new(), f64::INFINITY);
    for mask in 1u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n)
            .map(|i| if i > 0 && mask & (1 << (i - 1)) != 0 { 1 } else { 0 })
            .collect();
        let v = ncut(a, &labels, 2);
        if v < best.1 {
            best = (labels, v);
        }
    }
    best
}

/// Two unit-weight triangles joined by a single weak edge.
pub fn weak_bridge(bridge: f64) -> WeightedAdjacency {
    let mut w = SquareMatrix::zeros(6);
    let mut edge = |i: usize, j: usize, v: f64| {
        w.set(i, j, v);
        w.set(j, i, v);
    };
    for (i, j) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
        edge(i, j, 1.0);
    }
    edge(2, 3, bridge);
    WeightedAdjacency::from_weights(w).unwrap()
}

/// Block-diagonal graph: one random connected component per entry of
/// `sizes`, nodes scattered by `order` (node `order[k]` is the k-th node of
/// the block layout). Returns the adjacency and the true component labels.
pub fn components_graph(r: &mut ChaCha8Rng, sizes: &[usize], order: &[usize]) -> (WeightedAdjacency, Vec<usize>) {
    let n: usize = sizes.iter().sum();
    let mut w = SquareMatrix::zeros(n);
    let mut truth = vec![0; n];
    let mut start = 0;
    for (c, &s) in sizes.iter().enumerate() {
        for a in 0..s {
            truth[order[start + a]] = c;
            for b in a + 1..s {
                // path edges keep the block connected; extra edges are random
                if b == a + 1 || r.random_bool(0.5) {
                    let v = r.random_range(0.2..1.0);
                    w.set(order[start + a], order[start + b], v);
                    w.set(order[start + b], order[start + a], v);
                }
            }
        }
        start += s;
    }
    (WeightedAdjacency::from_weights(w).unwrap(), truth)
}

pub fn shuffled(r: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(r);
    v
}

pub fn noisy_blocks(width: usize, height: usize, seed: u64) -> ImageGrid {
    let mut r = rng(seed);
    let base = [[190u8, 40, 40], [40, 170, 60], [50, 60, 200], [220, 210, 60]];
    ImageGrid::from_fn(width, height, |x, y| {
        let c = base[(x * 3 / width + 2 * (y * 2 / height)) % 4];
        c.map(|v| v.saturating_add(r.random_range(0..25)))
    })
    .unwrap()
}

pub fn same_grouping(a: &Partition, labels: &[usize]) -> bool {
    a.same_grouping(&Partition::canonical(labels).unwrap())
}
