//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use mscluster::export::hierarchy_to_json;
use mscluster::features::kmeans;
use mscluster::ingest::{
    image_features, initial_partition_pointcloud, pointcloud_features, slic, ImageGrid, PointCloud, SlicParams,
};
use mscluster::metrics::rsc;
use mscluster::pipeline::geometric_schedule;
use mscluster::spectral::normalized_cut;
use mscluster::transport::{ot_distance, ot_solve, pairwise_distances};
use mscluster::vknng::{build_adjacency, compute_alphas, select_neighbors};
use mscluster::{
    build_hierarchy, AdjacencyConfig, AlphaPolicy, ClusterSignature, FeatureMatrix, Hierarchy, Partition,
    PipelineConfig, SimilarityKernel,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let mut o = f();
    let dt = t.elapsed();
    o.detail = format!("{}; {:.2}s", o.detail, dt.as_secs_f64());
    if let Some(limit) = limit {
        if dt >= limit {
            o.pass = false;
            o.detail.push_str(&format!(" exceeds {}s", limit.as_secs()));
        }
    }
    o
}

// 1: 200 uniform pairs, K <= 5, dim <= 4, tol 1e-9, < 10 s
fn ot_oracle() -> Outcome {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k = r.random_range(1..=5);
        let dim = r.random_range(1..=4);
        let a = random_uniform_signature(&mut r, k, dim);
        let b = random_uniform_signature(&mut r, k, dim);
        worst = worst.max((ot_distance(&a, &b).unwrap() - brute_force_ot(&a, &b)).abs());
    }
    outcome(worst <= 1e-9, format!("max |ot - permutation min| = {worst:.2e} (tol 1e-9)"))
}

// 2: 200 rows, N <= 12, exact match incl. ties, < 5 s
fn selection_oracle() -> Outcome {
    let mut r = rng(202);
    let mut mismatches = 0;
    let mut ties = 0;
    for _ in 0..200 {
        let n = r.random_range(1..=12);
        let row: Vec<f64> = (0..n).map(|_| r.random_range(0..12) as f64 / 4.0).collect();
        let self_index = r.random_range(0..n);
        let alpha = r.random_range(0..14) as f64 / 4.0;
        ties += row.iter().enumerate().filter(|&(j, &z)| j != self_index && z == alpha).count();
        if select_neighbors(&row, self_index, alpha).unwrap() != brute_force_selection(&row, self_index, alpha) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/200 mismatches ({ties} tie entries exercised)"))
}

// 3: component recovery for c in {2,3,4}; weak bridge vs exhaustive cut
fn spectral_recovery() -> Outcome {
    let mut r = rng(303);
    let mut failed = 0;
    let mut trials = 0;
    for c in 2..=4 {
        for t in 0..20 {
            let sizes: Vec<usize> = (0..c).map(|_| r.random_range(2..8)).collect();
            let n = sizes.iter().sum();
            let order = shuffled(&mut r, n);
            let (adj, truth) = components_graph(&mut r, &sizes, &order);
            trials += 1;
            if !same_grouping(&normalized_cut(&adj, c, t).unwrap().partition, &truth) {
                failed += 1;
            }
        }
    }
    let a = weak_bridge(0.01);
    let (best, _) = brute_force_bipartition(&a.weights);
    let bridge_ok = same_grouping(&normalized_cut(&a, 2, 0).unwrap().partition, &best)
        && same_grouping(&Partition::new(best.clone()).unwrap(), &[0, 0, 0, 1, 1, 1]);
    outcome(
        failed == 0 && bridge_ok,
        format!("{failed}/{trials} component graphs missed; weak bridge matches exhaustive cut: {bridge_ok}"),
    )
}

fn random_config(r: &mut rand_chacha::ChaCha8Rng) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.subclusters.k_max = r.random_range(1..=8);
    cfg.alpha = match r.random_range(0..3) {
        0 => AlphaPolicy::OrderStatistic,
        1 => AlphaPolicy::FixedK { k: r.random_range(1..4) },
        _ => AlphaPolicy::MeanDistance,
    };
    if r.random_bool(0.3) {
        cfg.adjacency.kernel = SimilarityKernel::Binary;
    }
    cfg
}

fn nesting_violations(h: &Hierarchy) -> usize {
    let mut v = 0;
    for l in 0..h.depth() {
        let (fine, coarse, map) = (&h.levels[l], &h.levels[l + 1], &h.parent_maps[l]);
        v += (0..fine.n_nodes())
            .filter(|&m| coarse.label(m) != map[fine.label(m)])
            .count();
        v += usize::from(!fine.refines(coarse));
    }
    v += h
        .levels
        .iter()
        .zip(&h.schedule)
        .filter(|(p, &n)| p.n_clusters() != n)
        .count();
    v
}

// 4: 50 random synthetic inputs, zero nesting violations
fn nesting() -> Outcome {
    let mut r = rng(404);
    let mut violations = 0;
    let mut levels_checked = 0;
    for i in 0..50u64 {
        let (init, feats) = if i % 2 == 0 {
            let (w, h) = (r.random_range(16..40), r.random_range(16..40));
            let img = noisy_blocks(w, h, i);
            let params = SlicParams {
                n_superpixels: r.random_range(12..40),
                ..SlicParams::default()
            };
            (slic(&img, &params).unwrap(), image_features(&img, r.random_range(0.0..1.0)).unwrap())
        } else {
            let n = r.random_range(40..150);
            let pos: Vec<[f64; 3]> = (0..n).map(|_| [0; 3].map(|_| r.random_range(-5.0..5.0))).collect();
            let col: Vec<[u8; 3]> = (0..n).map(|_| [0; 3].map(|_| r.random())).collect();
            let cloud = PointCloud::new(pos, Some(col)).unwrap();
            let (f, _) = pointcloud_features(&cloud, r.random_bool(0.5)).unwrap();
            (initial_partition_pointcloud(&f, r.random_range(8..30), i).unwrap(), f)
        };
        let final_n = r.random_range(2..=4).min(init.n_clusters() - 1);
        let depth = r.random_range(1..=4).min(init.n_clusters() - final_n);
        let schedule = geometric_schedule(init.n_clusters(), final_n, depth).unwrap();
        let h = build_hierarchy(&init, &feats, &schedule, &random_config(&mut r), i).unwrap();
        violations += nesting_violations(&h) + usize::from(h.check_nesting().is_err());
        levels_checked += h.depth();
    }
    outcome(violations == 0, format!("{violations} violations over 50 hierarchies ({levels_checked} level pairs)"))
}

/// 64x64, vertical bands A | B | A | C with mild noise.
fn two_tone_bands() -> (ImageGrid, Vec<u8>) {
    let colors = [[200u8, 40, 40], [40, 180, 60], [40, 60, 200]];
    let bounds = [(0usize, 14usize, 0usize), (14, 32, 1), (32, 46, 0), (46, 64, 2)];
    let region = |x: usize| bounds.iter().position(|&(a, b, _)| x >= a && x < b).unwrap() as u8;
    let mut r = rng(505);
    let img = ImageGrid::from_fn(64, 64, |x, _| {
        colors[bounds[region(x) as usize].2].map(|v| v.saturating_add(r.random_range(0..8)))
    })
    .unwrap();
    let regions = (0..64 * 64).map(|i| region(i % 64)).collect();
    (img, regions)
}

fn majority(labels: impl Iterator<Item = usize>) -> (usize, usize) {
    let mut counts = std::collections::BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts.into_iter().max_by_key(|&(l, c)| (c, std::cmp::Reverse(l))).unwrap()
}

// 5: same-colored separated regions share a parent at n = 3, >= 95% agreement, < 30 s
fn non_local_merge() -> Outcome {
    let (img, regions) = two_tone_bands();
    let init = slic(&img, &SlicParams { n_superpixels: 36, ..SlicParams::default() }).unwrap();
    let feats = image_features(&img, 0.0).unwrap();
    let regions = &regions;
    let in_region = |k: u8| (0..regions.len()).filter(move |&i| regions[i] == k);
    let a_pixels: Vec<usize> = in_region(0).chain(in_region(2)).collect();
    let mut pass = init.n_clusters() >= 16;
    let mut notes = Vec::new();
    for depth in 1..=3 {
        let schedule = geometric_schedule(init.n_clusters(), 3, depth).unwrap();
        let h = build_hierarchy(&init, &feats, &schedule, &PipelineConfig::default(), 7).unwrap();
        let top = h.levels.last().unwrap();
        let (m1, _) = majority(in_region(0).map(|i| top.label(i)));
        let (m2, _) = majority(in_region(2).map(|i| top.label(i)));
        let agree = a_pixels.iter().filter(|&&i| top.label(i) == m1).count() as f64 / a_pixels.len() as f64;
        pass &= m1 == m2 && agree >= 0.95 && top.n_clusters() == 3;
        notes.push(format!("{:?}: shared {} at {:.1}%", h.schedule, m1 == m2, 100.0 * agree));
    }
    outcome(
        pass,
        format!("{} superpixels; {} (need shared parent, >= 95%)", init.n_clusters(), notes.join("; ")),
    )
}

// 6: literal RSC values, integer exact
fn rsc_values() -> Outcome {
    let set = |v: &[usize]| v.iter().map(|x| x - 1).collect::<BTreeSet<usize>>();
    let fine = |groups: &[&[usize]], n: usize| {
        let mut l = vec![0i64; n];
        for (g, members) in groups.iter().enumerate() {
            for &m in members.iter() {
                l[m - 1] = g as i64;
            }
        }
        Partition::from_raw_labels(&l).unwrap()
    };
    let one = rsc(&fine(&[&[1, 2, 3], &[4, 5, 6]], 6), &set(&[1, 2, 3])).unwrap();
    let two = rsc(&fine(&[&[1, 2, 3], &[4, 5, 6]], 6), &set(&[1, 2, 3, 4, 5, 6])).unwrap();
    let three = rsc(&fine(&[&[1, 2, 3], &[4], &[5, 6]], 6), &set(&[3, 4])).unwrap();
    // {1,2,3,4},{5,6} against {3,4,5,6}: unions are 6 and 4, so (6+4)/4
    let straddle = rsc(&fine(&[&[1, 2, 3, 4], &[5, 6]], 6), &set(&[3, 4, 5, 6])).unwrap();
    outcome(
        one == 1.0 && two == 2.0 && three == 3.0 && straddle == 2.5,
        format!(
            "exact: {one}, {two}, {three} (fine {{1,2,3}},{{4}},{{5,6}} vs {{3,4}}); \
             fine {{1,2,3,4}},{{5,6}} vs {{3,4,5,6}} = {straddle} = (6+4)/4, above nested 2"
        ),
    )
}

fn sig(r: &mut rand_chacha::ChaCha8Rng, k: usize) -> ClusterSignature {
    let c: Vec<Vec<f64>> = (0..k).map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let m: Vec<f64> = (0..k).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = m.iter().sum();
    ClusterSignature::new(c, m.iter().map(|x| x / s).collect()).unwrap()
}

// 7: monotonicity and conservation
fn conservation() -> Outcome {
    let mut r = rng(707);
    let mut bad = Vec::new();
    let mut worst_marginal = 0.0f64;
    let mut worst_scale = 0.0f64;
    for t in 0..100u64 {
        let n = r.random_range(5..80);
        let v: Vec<f64> = (0..n * 3).map(|_| r.random_range(-4.0..4.0)).collect();
        let pts = FeatureMatrix::new(n, 3, v).unwrap();
        let sub = kmeans(&pts, r.random_range(1..6).min(n), t).unwrap();
        if sub.objective_trace.windows(2).any(|w| w[1] > w[0]) {
            bad.push("kmeans trace increased");
        }

        let (a, b) = (sig(&mut r, 1 + t as usize % 8), sig(&mut r, 1 + (t as usize * 3) % 8));
        let sol = ot_solve(&a, &b).unwrap();
        for (s, m) in sol.plan.row_sums().iter().zip(a.masses()) {
            worst_marginal = worst_marginal.max((s - m).abs());
        }
        for (s, m) in sol.plan.col_sums().iter().zip(b.masses()) {
            worst_marginal = worst_marginal.max((s - m).abs());
        }
        let s = r.random_range(0.1..10.0);
        let d = sol.cost;
        let ds = ot_distance(&a.scaled(s).unwrap(), &b.scaled(s).unwrap()).unwrap();
        worst_scale = worst_scale.max((ds - s * s * d).abs() / (1.0 + ds.abs()));

        let m = r.random_range(2..20);
        let sigs: Vec<_> = (0..m)
            .map(|_| {
                let k = r.random_range(1..5);
                sig(&mut r, k)
            })
            .collect();
        let z = pairwise_distances(&sigs).unwrap();
        if !z.is_symmetric(0.0) || (0..m).any(|i| z.get(i, i) != 0.0) {
            bad.push("Z not symmetric with zero diagonal");
        }
        let adj = build_adjacency(&z, &compute_alphas(&z, AlphaPolicy::default()).unwrap(), &AdjacencyConfig::default())
            .unwrap();
        let w = &adj.weights;
        if !w.is_symmetric(0.0)
            || (0..m).any(|i| w.get(i, i) != 0.0 || adj.neighbor_count(i) < 1)
            || w.as_slice().iter().any(|&x| x < 0.0)
        {
            bad.push("adjacency postcondition");
        }
    }
    bad.dedup();
    let pass = bad.is_empty() && worst_marginal <= 1e-9 && worst_scale <= 1e-7;
    outcome(
        pass,
        format!(
            "100 rounds; max marginal error {worst_marginal:.1e} (tol 1e-9); max relative scale-law error \
             {worst_scale:.1e} (tol 1e-7); {}",
            if bad.is_empty() { "no ordering/graph violations".to_string() } else { bad.join(", ") }
        ),
    )
}

fn image_run(threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let img = noisy_blocks(48, 40, 808);
        let init = slic(&img, &SlicParams { n_superpixels: 40, ..SlicParams::default() }).unwrap();
        let feats = image_features(&img, 0.0).unwrap();
        let schedule = geometric_schedule(init.n_clusters(), 4, 3).unwrap();
        let h = build_hierarchy(&init, &feats, &schedule, &PipelineConfig::default(), 808).unwrap();
        hierarchy_to_json(&h, true)
    })
}

// 8: byte-identical exports across runs (and worker counts)
fn determinism() -> Outcome {
    let a = image_run(1);
    let b = image_run(1);
    let c = image_run(4);
    outcome(
        a == b && a == c,
        format!("{} bytes; repeat identical: {}; 1 vs 4 threads identical: {}", a.len(), a == b, a == c),
    )
}

fn main() {
    let criteria: Vec<(&str, Option<u64>, fn() -> Outcome)> = vec![
        ("OT oracle equivalence", Some(10), ot_oracle),
        ("Neighbor selection oracle equivalence", Some(5), selection_oracle),
        ("Spectral recovery", None, spectral_recovery),
        ("Nesting invariant", None, nesting),
        ("Non-local merging", Some(30), non_local_merge),
        ("RSC literal values", None, rsc_values),
        ("Monotonicity and conservation", None, conservation),
        ("Determinism", None, determinism),
    ];
    let mut failures = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let o = timed(limit.map(Duration::from_secs), f);
        if !o.pass {
            failures += 1;
        }
        println!("[{}] {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} of 8 passed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
