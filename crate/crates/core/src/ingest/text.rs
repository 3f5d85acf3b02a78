//! Plain-text label maps and feature matrices.
//!
//! Label map: the node count, then one integer label per node. Feature matrix:
//! `rows dim`, then `rows * dim` numbers in row-major order. Tokens are
//! whitespace separated; lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::partition::Partition;

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace)
}

fn parse_count(tok: Option<&str>, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Format(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::Format(format!("{what} '{tok}' is not a non-negative integer")))
}

pub fn parse_label_map(text: &str) -> Result<Partition> {
    let mut it = tokens(text);
    let n = parse_count(it.next(), "node count")?;
    let labels = it
        .map(|t| {
            t.parse::<i64>()
                .map_err(|_| Error::Format(format!("label '{t}' is not an integer")))
        })
        .collect::<Result<Vec<i64>>>()?;
    if labels.len() != n {
        return Err(Error::Format(format!(
            "label map declares {n} nodes but lists {}",
            labels.len()
        )));
    }
    Partition::from_raw_labels(&labels)
}

pub fn write_label_map(partition: &Partition) -> String {
    let mut out = format!("{}\n", partition.n_nodes());
    for l in partition.labels() {
        let _ = writeln!(out, "{l}");
    }
    out
}

pub fn parse_features(text: &str) -> Result<FeatureMatrix> {
    let mut it = tokens(text);
    let rows = parse_count(it.next(), "row count")?;
    let dim = parse_count(it.next(), "dimension")?;
    let values = it
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Format(format!("feature '{t}' is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != rows * dim {
        return Err(Error::Format(format!(
            "feature file declares {rows}x{dim} but holds {} values",
            values.len()
        )));
    }
    FeatureMatrix::new(rows, dim, values)
}

pub fn write_features(features: &FeatureMatrix) -> String {
    let mut out = format!("{} {}\n", features.rows(), features.dim());
    for row in features.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    }
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<Partition> {
    let path = path.as_ref();
    parse_label_map(&read_text(path)?).map_err(|e| with_path(path, e))
}

pub fn save_label_map(partition: &Partition, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_label_map(partition)).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    parse_features(&read_text(path)?).map_err(|e| with_path(path, e))
}

pub fn save_features(features: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_features(features)).map_err(|e| Error::io(path, e))
}
