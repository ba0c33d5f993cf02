//! Label corruption models.
//!
//! Each model takes a one-hot truth matrix `G` and produces corrupted labels
//! `Y = G + M`, where the mask `M` has entries in `{-1, 0, 1}` and
//! `M + G >= 0` holds entrywise (a label can only be removed where it was
//! present). Candidate-set models guarantee at least one label per row via
//! per-row rejection resampling; one-hot models keep rows one-hot.
//!
//! Corruption is deterministic given the spec: row `i` draws from its own
//! seeded stream, so results do not depend on traversal order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matio::{validate_one_hot, Matrix};

/// Rows are redrawn when a constraint fails; a row that cannot satisfy its
/// constraint within this many attempts is a configuration error.
const REDRAW_LIMIT: usize = 10_000;

/// Stream id reserved for the removal-subset draw; rows use streams `0..n`.
const SELECTION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Flip each label indicator independently with probability `p`,
    /// redrawing rows that end up with no candidates.
    CandidateFlip,
    /// Candidate flips, then the true label is removed from a uniformly
    /// chosen `removal_fraction` of rows (rows that would become empty are
    /// redrawn).
    CandidateFlipWithTruthRemoval,
    /// With probability `p`, replace the true label by a uniformly chosen
    /// different class. Rows stay one-hot.
    Symmetric,
    /// With probability `p`, replace class `j` by class `(j + 1) mod l`.
    /// Rows stay one-hot.
    Asymmetric,
}

/// Replayable description of a corruption draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Flip probability, in `[0, 1]`.
    pub p: f64,
    /// Fraction of rows whose true label is removed; only meaningful for
    /// [`NoiseKind::CandidateFlipWithTruthRemoval`] and must be 0 otherwise.
    #[serde(default)]
    pub removal_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CorruptionResult {
    /// Corrupted labels `Y`, same shape as `G`, entries in `{0, 1}`.
    pub labels: Matrix,
    /// Mask `M = Y - G`, entries in `{-1, 0, 1}`.
    pub mask: Matrix,
    /// Fraction of entries actually changed: `nnz(M) / (n * l)`.
    pub realized_flip_rate: f64,
}

/// Applies `spec` to the one-hot truth `g`.
pub fn corrupt(g: &Matrix, spec: &NoiseSpec) -> Result<CorruptionResult> {
    validate_one_hot(g, "corrupt truth labels")?;
    if !spec.p.is_finite() || !(0.0..=1.0).contains(&spec.p) {
        return Err(Error::Config(format!(
            "flip probability p must lie in [0, 1], got {}",
            spec.p
        )));
    }
    if !spec.removal_fraction.is_finite() || !(0.0..=1.0).contains(&spec.removal_fraction) {
        return Err(Error::Config(format!(
            "removal_fraction must lie in [0, 1], got {}",
            spec.removal_fraction
        )));
    }
    if spec.removal_fraction != 0.0 && spec.kind != NoiseKind::CandidateFlipWithTruthRemoval {
        return Err(Error::Config(
            "removal_fraction is only valid for candidate_flip_with_truth_removal".to_string(),
        ));
    }
    let (n, l) = (g.nrows(), g.ncols());
    if matches!(spec.kind, NoiseKind::Symmetric | NoiseKind::Asymmetric) && l < 2 {
        return Err(Error::ImpossibleFlip);
    }

    let remove = match spec.kind {
        NoiseKind::CandidateFlipWithTruthRemoval => {
            removal_flags(n, spec.removal_fraction, spec.seed)
        }
        _ => vec![false; n],
    };

    let mut labels = g.clone();
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let truth = truth_index(g, i);
        let mut row = labels.row_mut(i);
        match spec.kind {
            NoiseKind::CandidateFlip | NoiseKind::CandidateFlipWithTruthRemoval => {
                let mut attempts = 0usize;
                loop {
                    attempts += 1;
                    if attempts > REDRAW_LIMIT {
                        return Err(Error::RedrawLimit {
                            row: i + 1,
                            attempts: REDRAW_LIMIT,
                        });
                    }
                    let mut count = 0usize;
                    for j in 0..l {
                        let flipped = rng.gen_bool(spec.p);
                        let v = if flipped { 1.0 - g[(i, j)] } else { g[(i, j)] };
                        row[j] = v;
                        if v == 1.0 {
                            count += 1;
                        }
                    }
                    if count == 0 {
                        continue;
                    }
                    if remove[i] && row[truth] == 1.0 {
                        if count == 1 {
                            // Removing the truth would empty the row.
                            continue;
                        }
                        row[truth] = 0.0;
                    }
                    break;
                }
            }
            NoiseKind::Symmetric => {
                if rng.gen_bool(spec.p) {
                    let draw = rng.gen_range(0..l - 1);
                    let target = if draw >= truth { draw + 1 } else { draw };
                    row[truth] = 0.0;
                    row[target] = 1.0;
                }
            }
            NoiseKind::Asymmetric => {
                if rng.gen_bool(spec.p) {
                    let target = (truth + 1) % l;
                    row[truth] = 0.0;
                    row[target] = 1.0;
                }
            }
        }
    }

    let mask = &labels - g;
    let flips = mask.iter().filter(|&&v| v != 0.0).count();
    Ok(CorruptionResult {
        labels,
        mask,
        realized_flip_rate: flips as f64 / (n * l) as f64,
    })
}

/// Frobenius norm of a corruption mask: `sqrt(nnz(M))`, after checking every
/// entry lies in `{-1, 0, 1}`.
pub fn mask_frobenius(m: &Matrix) -> Result<f64> {
    let mut nnz = 0usize;
    for ((i, j), &v) in m.indexed_iter() {
        if v != -1.0 && v != 0.0 && v != 1.0 {
            return Err(Error::EntryDomain {
                context: "corruption mask".to_string(),
                row: i + 1,
                col: j + 1,
                value: v,
                allowed: "{-1, 0, 1}".to_string(),
            });
        }
        if v != 0.0 {
            nnz += 1;
        }
    }
    Ok((nnz as f64).sqrt())
}

/// Uniform sample of `round(fraction * n)` rows via partial Fisher-Yates on
/// a dedicated stream.
fn removal_flags(n: usize, fraction: f64, seed: u64) -> Vec<bool> {
    let count = ((fraction * n as f64).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SELECTION_STREAM);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut flags = vec![false; n];
    for &i in &idx[..count] {
        flags[i] = true;
    }
    flags
}

fn truth_index(g: &Matrix, row: usize) -> usize {
    g.row(row)
        .iter()
        .position(|&v| v == 1.0)
        .expect("one-hot row validated")
}
