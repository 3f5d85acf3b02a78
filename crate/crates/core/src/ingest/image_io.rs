use std::path::Path;

use image::{ImageBuffer, Rgb, RgbImage};

use super::ImageGrid;
use crate::error::{Error, Result};
use crate::partition::Partition;

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    ImageGrid::new(w as usize, h as usize, img.pixels().map(|p| p.0).collect())
}

pub fn save_image(image: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf: RgbImage = ImageBuffer::from_fn(image.width() as u32, image.height() as u32, |x, y| {
        Rgb(image.pixel(x as usize, y as usize))
    });
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Deterministic, well-spread colors: one per cluster id.
pub fn label_palette(n: usize) -> Vec<[u8; 3]> {
    let mut out: Vec<[u8; 3]> = Vec::with_capacity(n);
    for i in 0..n {
        // golden-ratio hue walk; saturation/value cycle so large palettes stay distinct
        let hue = (i as f64 * 0.618_033_988_749_894_9).fract();
        let sat = [0.85, 0.6, 0.95][(i / 7) % 3];
        let val = [0.95, 0.75, 0.55][(i / 21) % 3];
        let mut c = hsv_to_rgb(hue, sat, val);
        while out.contains(&c) {
            c[2] = c[2].wrapping_add(1);
        }
        out.push(c);
    }
    out
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    let (r, g, b) = match i as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round() as u8)
}

/// Colors every pixel by its cluster id.
pub fn render_labels(partition: &Partition, width: usize, height: usize) -> Result<ImageGrid> {
    if partition.n_nodes() != width * height {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a {width}x{height} image",
            partition.n_nodes()
        )));
    }
    let palette = label_palette(partition.n_clusters());
    ImageGrid::new(
        width,
        height,
        partition.labels().iter().map(|&l| palette[l]).collect(),
    )
}

pub fn write_label_image(
    partition: &Partition,
    width: usize,
    height: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    save_image(&render_labels(partition, width, height)?, path)
}
