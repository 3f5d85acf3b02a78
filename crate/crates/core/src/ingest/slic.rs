//! SLIC superpixels: localized k-means in joint color/position space followed
//! by a connectivity pass.

use serde::{Deserialize, Serialize};

use super::ImageGrid;
use crate::error::{Error, Result};
use crate::partition::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlicColorSpace {
    #[default]
    Rgb,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicParams {
    pub n_superpixels: usize,
    pub compactness: f64,
    pub iterations: usize,
    #[serde(default)]
    pub color_space: SlicColorSpace,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            n_superpixels: 200,
            compactness: 10.0,
            iterations: 10,
            color_space: SlicColorSpace::Rgb,
        }
    }
}

#[derive(Clone, Copy)]
struct Center {
    color: [f64; 3],
    x: f64,
    y: f64,
}

/// Grid shape `(columns, rows)` with product closest to `n`, then aspect closest
/// to the image's; ties prefer more columns.
fn seed_grid(n: usize, width: usize, height: usize) -> (usize, usize) {
    let aspect = width as f64 / height as f64;
    let mut best = (1, 1);
    let mut best_key = (usize::MAX, f64::INFINITY);
    for nx in 1..=n.min(width) {
        let ny = ((n as f64 / nx as f64).round() as usize).clamp(1, height);
        let count_err = (nx * ny).abs_diff(n);
        let aspect_err = ((nx as f64 / ny as f64) / aspect).ln().abs();
        let key = (count_err, aspect_err);
        if key.0 < best_key.0 || (key.0 == best_key.0 && key.1 <= best_key.1 + 1e-12) {
            best = (nx, ny);
            best_key = key;
        }
    }
    best
}

fn srgb_to_lab(p: [u8; 3]) -> [f64; 3] {
    let lin = |c: u8| {
        let c = c as f64 / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    };
    let (r, g, b) = (lin(p[0]), lin(p[1]), lin(p[2]));
    let x = (0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b) / 0.950_47;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = (0.019_333_9 * r + 0.119_192 * g + 0.950_304_1 * b) / 1.088_83;
    let f = |t: f64| {
        if t > 216.0 / 24389.0 {
            t.cbrt()
        } else {
            (24389.0 / 27.0 * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Superpixel partition of `image`; every pixel is labeled and every label is 4-connected.
pub fn slic(image: &ImageGrid, params: &SlicParams) -> Result<Partition> {
    let (w, h) = (image.width(), image.height());
    let n_pix = image.pixel_count();
    if params.n_superpixels == 0 || params.n_superpixels > n_pix {
        return Err(Error::InvalidArgument(format!(
            "superpixel count {} outside 1..={n_pix}",
            params.n_superpixels
        )));
    }
    if !(params.compactness > 0.0) || !params.compactness.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "compactness {} must be positive",
            params.compactness
        )));
    }
    if params.iterations == 0 {
        return Err(Error::InvalidArgument("SLIC needs at least one iteration".into()));
    }

    let colors: Vec<[f64; 3]> = match params.color_space {
        SlicColorSpace::Rgb => image.pixels().iter().map(|p| p.map(|c| c as f64)).collect(),
        SlicColorSpace::Lab => image.pixels().iter().map(|&p| srgb_to_lab(p)).collect(),
    };
    let color_at = |x: usize, y: usize| colors[y * w + x];

    let step = (n_pix as f64 / params.n_superpixels as f64).sqrt();
    let (nx, ny) = seed_grid(params.n_superpixels, w, h);
    let cell_w = w as f64 / nx as f64;
    let cell_h = h as f64 / ny as f64;
    let window = cell_w.max(cell_h).max(step).ceil() as isize;

    let gradient = |x: usize, y: usize| {
        let d = |a: [f64; 3], b: [f64; 3]| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>();
        let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        d(color_at(xr, y), color_at(xl, y)) + d(color_at(x, yd), color_at(x, yu))
    };

    let mut centers: Vec<Center> = Vec::with_capacity(nx * ny);
    for gy in 0..ny {
        for gx in 0..nx {
            let cx = (((gx as f64 + 0.5) * cell_w) as usize).min(w - 1);
            let cy = (((gy as f64 + 0.5) * cell_h) as usize).min(h - 1);
            // move to the lowest-gradient pixel of the 3x3 neighborhood
            let (mut bx, mut by, mut bg) = (cx, cy, gradient(cx, cy));
            for yy in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
                for xx in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
                    let g = gradient(xx, yy);
                    if g < bg {
                        (bx, by, bg) = (xx, yy, g);
                    }
                }
            }
            centers.push(Center {
                color: color_at(bx, by),
                x: bx as f64,
                y: by as f64,
            });
        }
    }

    let spatial = (params.compactness / step).powi(2);
    let mut labels = vec![usize::MAX; n_pix];
    let mut best = vec![f64::INFINITY; n_pix];
    for _ in 0..params.iterations {
        best.iter_mut().for_each(|b| *b = f64::INFINITY);
        for (k, c) in centers.iter().enumerate() {
            let x0 = (c.x.round() as isize - window).max(0) as usize;
            let x1 = ((c.x.round() as isize + window) as usize).min(w - 1);
            let y0 = (c.y.round() as isize - window).max(0) as usize;
            let y1 = ((c.y.round() as isize + window) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let p = color_at(x, y);
                    let dc: f64 = (0..3).map(|i| (p[i] - c.color[i]).powi(2)).sum();
                    let ds = (x as f64 - c.x).powi(2) + (y as f64 - c.y).powi(2);
                    let d = dc + spatial * ds;
                    let idx = y * w + x;
                    if d < best[idx] {
                        best[idx] = d;
                        labels[idx] = k;
                    }
                }
            }
        }

        let mut acc = vec![[0.0f64; 6]; centers.len()];
        for y in 0..h {
            for x in 0..w {
                let k = labels[y * w + x];
                if k == usize::MAX {
                    continue;
                }
                let p = color_at(x, y);
                let a = &mut acc[k];
                a[0] += p[0];
                a[1] += p[1];
                a[2] += p[2];
                a[3] += x as f64;
                a[4] += y as f64;
                a[5] += 1.0;
            }
        }
        for (c, a) in centers.iter_mut().zip(&acc) {
            if a[5] > 0.0 {
                c.color = [a[0] / a[5], a[1] / a[5], a[2] / a[5]];
                c.x = a[3] / a[5];
                c.y = a[4] / a[5];
            }
        }
    }

    let expected_area = n_pix as f64 / centers.len() as f64;
    let min_size = ((expected_area / 4.0) as usize).max(1);
    let connected = enforce_connectivity(&labels, w, h, min_size);
    Partition::canonical(&connected)
}

/// Relabels 4-connected components; components smaller than `min_size` (and
/// unlabeled pixels) are absorbed by an adjacent, already-labeled component.
fn enforce_connectivity(labels: &[usize], w: usize, h: usize, min_size: usize) -> Vec<usize> {
    let n = w * h;
    let mut out = vec![usize::MAX; n];
    let mut next = 0usize;
    let neighbors = |i: usize| {
        let (x, y) = (i % w, i / w);
        let mut v = Vec::with_capacity(4);
        if x > 0 {
            v.push(i - 1);
        }
        if x + 1 < w {
            v.push(i + 1);
        }
        if y > 0 {
            v.push(i - w);
        }
        if y + 1 < h {
            v.push(i + w);
        }
        v
    };
    let mut segment = Vec::new();
    for start in 0..n {
        if out[start] != usize::MAX {
            continue;
        }
        let adjacent = neighbors(start)
            .into_iter()
            .find(|&j| out[j] != usize::MAX)
            .map(|j| out[j]);
        segment.clear();
        segment.push(start);
        out[start] = next;
        let mut head = 0;
        while head < segment.len() {
            let i = segment[head];
            head += 1;
            for j in neighbors(i) {
                if out[j] == usize::MAX && labels[j] == labels[start] {
                    out[j] = next;
                    segment.push(j);
                }
            }
        }
        let orphan = labels[start] == usize::MAX;
        match adjacent {
            Some(adj) if segment.len() < min_size || orphan => {
                for &i in &segment {
                    out[i] = adj;
                }
            }
            _ => next += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_four_connected(p: &Partition, w: usize, h: usize) -> bool {
        let members = p.members();
        members.iter().all(|m| {
            let set: std::collections::HashSet<usize> = m.iter().copied().collect();
            let mut seen = std::collections::HashSet::from([m[0]]);
            let mut stack = vec![m[0]];
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                let mut nb = vec![];
                if x > 0 {
                    nb.push(i - 1);
                }
                if x + 1 < w {
                    nb.push(i + 1);
                }
                if y > 0 {
                    nb.push(i - w);
                }
                if y + 1 < h {
                    nb.push(i + w);
                }
                for j in nb {
                    if set.contains(&j) && seen.insert(j) {
                        stack.push(j);
                    }
                }
            }
            seen.len() == m.len()
        })
    }

    #[test]
    fn constant_image_equal_areas() {
        let img = ImageGrid::from_fn(64, 64, |_, _| [90, 90, 90]).unwrap();
        let p = slic(
            &img,
            &SlicParams {
                n_superpixels: 4,
                ..SlicParams::default()
            },
        )
        .unwrap();
        assert_eq!(p.n_clusters(), 4);
        let target = 64.0 * 64.0 / 4.0;
        for s in p.sizes() {
            assert!((s as f64 - target).abs() <= 0.2 * target, "size {s}");
        }
        assert!(is_four_connected(&p, 64, 64));
    }

    #[test]
    fn single_superpixel() {
        let img = ImageGrid::from_fn(10, 7, |x, y| [(x * 20) as u8, (y * 30) as u8, 0]).unwrap();
        let p = slic(
            &img,
            &SlicParams {
                n_superpixels: 1,
                ..SlicParams::default()
            },
        )
        .unwrap();
        assert_eq!(p.n_clusters(), 1);
    }

    #[test]
    fn two_tone_halves() {
        let img =
            ImageGrid::from_fn(40, 30, |x, _| if x < 20 { [250, 10, 10] } else { [10, 10, 250] })
                .unwrap();
        let p = slic(
            &img,
            &SlicParams {
                n_superpixels: 2,
                compactness: 1.0,
                ..SlicParams::default()
            },
        )
        .unwrap();
        assert_eq!(p.n_clusters(), 2);
        for y in 0..30 {
            for x in 0..40 {
                let same = p.label(y * 40 + x) == p.label(0);
                assert_eq!(same, x < 20);
            }
        }
    }

    #[test]
    fn argument_errors() {
        let img = ImageGrid::from_fn(2, 2, |_, _| [0, 0, 0]).unwrap();
        let bad = |n, c| {
            slic(
                &img,
                &SlicParams {
                    n_superpixels: n,
                    compactness: c,
                    ..SlicParams::default()
                },
            )
        };
        assert!(bad(0, 10.0).is_err());
        assert!(bad(5, 10.0).is_err());
        assert!(bad(2, 0.0).is_err());
    }

    #[test]
    fn textured_image_is_connected() {
        let img = ImageGrid::from_fn(48, 40, |x, y| {
            [((x * 37 + y * 11) % 256) as u8, ((x * y) % 256) as u8, ((y * 53) % 256) as u8]
        })
        .unwrap();
        for space in [SlicColorSpace::Rgb, SlicColorSpace::Lab] {
            let p = slic(
                &img,
                &SlicParams {
                    n_superpixels: 20,
                    color_space: space,
                    ..SlicParams::default()
                },
            )
            .unwrap();
            assert!(is_four_connected(&p, 48, 40));
        }
    }

    #[test]
    fn lab_white_point() {
        let l = srgb_to_lab([255, 255, 255]);
        assert!((l[0] - 100.0).abs() < 1e-3 && l[1].abs() < 1e-2 && l[2].abs() < 1e-2);
    }
}
