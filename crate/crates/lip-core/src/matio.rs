//! Dense matrix I/O and dataset manifests.
//!
//! Matrices are stored as headerless CSV: comma-delimited fields, one row per
//! line, `\n` line endings, no trailing delimiter. Every cell must parse as a
//! finite `f64`. Writing uses the shortest decimal rendering that round-trips
//! exactly, so `save_matrix(load_matrix(f))` is byte-identical to the
//! canonical re-serialization of `f`.
//!
//! Row and column numbers in error messages are 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of finite `f64` values.
pub type Matrix = Array2<f64>;

/// Parses headerless CSV text into a matrix. `origin` is used in error
/// messages only.
pub fn parse_matrix(text: &str, origin: &Path) -> Result<Matrix> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(Error::EmptyMatrix {
            path: origin.to_path_buf(),
        });
    }
    let mut data = Vec::new();
    let mut cols = 0usize;
    let mut rows = 0usize;
    for (i, line) in body.split('\n').enumerate() {
        let mut width = 0usize;
        for (j, field) in line.split(',').enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::ParseField {
                path: origin.to_path_buf(),
                row: i + 1,
                col: j + 1,
                field: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    context: origin.display().to_string(),
                    row: i + 1,
                    col: j + 1,
                    value,
                });
            }
            data.push(value);
            width += 1;
        }
        if i == 0 {
            cols = width;
        } else if width != cols {
            return Err(Error::RaggedRow {
                path: origin.to_path_buf(),
                row: i + 1,
                expected: cols,
                got: width,
            });
        }
        rows += 1;
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("row-major fill matches shape"))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text, path)
}

/// Canonical CSV bytes for a matrix: shortest round-trip decimal per cell,
/// comma-separated, every row terminated by `\n`.
pub fn render_matrix(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            write!(out, "{v}").expect("string write cannot fail");
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_matrix(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// How the label matrix of a dataset is to be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    /// Exactly one `1` per row: ground-truth class assignments.
    OneHotTruth,
    /// At least one `1` per row: candidate label sets.
    CandidateSet,
}

/// On-disk description of a dataset: where the feature and label CSV files
/// live and what shape and label discipline they must satisfy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub features_path: String,
    pub labels_path: String,
    /// Sample count (rows of both files).
    pub n: usize,
    /// Feature dimension (columns of the feature file).
    pub q: usize,
    /// Class count (columns of the label file).
    pub l: usize,
    pub label_kind: LabelKind,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// A manifest's data, loaded and checked against its declared shape and
/// label discipline.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Matrix,
    pub label_kind: LabelKind,
}

/// Loads the files a manifest points at (relative paths resolve against
/// `base_dir`) and validates shapes and label constraints. The first
/// offending row is reported on failure.
pub fn validate_manifest(manifest: &DatasetManifest, base_dir: &Path) -> Result<Dataset> {
    let resolve = |p: &str| -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    };
    let features = load_matrix(resolve(&manifest.features_path))?;
    let labels = load_matrix(resolve(&manifest.labels_path))?;
    let (n, q, l) = (manifest.n, manifest.q, manifest.l);
    if features.nrows() != n || features.ncols() != q {
        return Err(Error::Shape(format!(
            "{}: expected {} x {}, found {} x {}",
            manifest.features_path,
            n,
            q,
            features.nrows(),
            features.ncols()
        )));
    }
    if labels.nrows() != n || labels.ncols() != l {
        return Err(Error::Shape(format!(
            "{}: expected {} x {}, found {} x {}",
            manifest.labels_path,
            n,
            l,
            labels.nrows(),
            labels.ncols()
        )));
    }
    match manifest.label_kind {
        LabelKind::OneHotTruth => validate_one_hot(&labels, &manifest.labels_path)?,
        LabelKind::CandidateSet => validate_candidate_set(&labels, &manifest.labels_path)?,
    }
    Ok(Dataset {
        features,
        labels,
        label_kind: manifest.label_kind,
    })
}

/// Checks every entry is exactly 0 or 1 and every row sums to exactly 1.
pub fn validate_one_hot(labels: &Matrix, context: &str) -> Result<()> {
    validate_binary(labels, context)?;
    for (i, row) in labels.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if sum != 1.0 {
            return Err(Error::RowSum {
                context: context.to_string(),
                row: i + 1,
                sum,
                expected: "exactly 1 (one-hot)".to_string(),
            });
        }
    }
    Ok(())
}

/// Checks every entry is exactly 0 or 1 and every row sums to at least 1.
pub fn validate_candidate_set(labels: &Matrix, context: &str) -> Result<()> {
    validate_binary(labels, context)?;
    for (i, row) in labels.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if sum < 1.0 {
            return Err(Error::RowSum {
                context: context.to_string(),
                row: i + 1,
                sum,
                expected: "at least 1 (candidate set)".to_string(),
            });
        }
    }
    Ok(())
}

fn validate_binary(labels: &Matrix, context: &str) -> Result<()> {
    for ((i, j), &v) in labels.indexed_iter() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::EntryDomain {
                context: context.to_string(),
                row: i + 1,
                col: j + 1,
                value: v,
                allowed: "{0, 1}".to_string(),
            });
        }
    }
    Ok(())
}

/// Rejects matrices containing NaN or infinities, reporting the first
/// offending position.
pub fn ensure_finite(m: &Matrix, context: &str) -> Result<()> {
    for ((i, j), &v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: context.to_string(),
                row: i + 1,
                col: j + 1,
                value: v,
            });
        }
    }
    Ok(())
}
