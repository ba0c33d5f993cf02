//! Synthetic Gaussian-cluster classification datasets.
//!
//! Class centroids span a randomly oriented subspace of rank
//! `default_k(q, l)` with a controlled singular spectrum, and samples are
//! the centroid plus isotropic Gaussian noise of scale
//! `within_class_sigma`. Pairwise centroid distances scale with
//! `cluster_separation`, so the separation-to-sigma ratio controls how
//! cleanly a linear classifier can separate the classes.
//!
//! The spectrum shaping makes the benchmark behave like weight matrices of
//! trained classifiers rather than like unstructured noise:
//!
//! - the class structure has a definite rank, so components beyond it carry
//!   only fitted label noise and rank truncation at the default k is
//!   benign;
//! - the smallest centroid singular value is placed so that the induced
//!   least-squares weight matrix has an isolated dominant component (ridge
//!   maps centroid directions through m / (m^2 + l sigma^2), reversing
//!   their order), giving spectrum and subspace diagnostics a stable top
//!   component at low label-noise rates;
//! - centroids are centered so the one-hot label mean does not smuggle in
//!   an extra strong direction;
//! - with six or more classes, one designated class pair is separated
//!   mainly by the largest centroid singular value. That component maps to
//!   the smallest induced weight component, so it is the first thing rank
//!   truncation removes; a controlled fallback margin for the pair leaks
//!   into one mid-ladder component. Truncating at the default k therefore
//!   costs a small, predictable amount of accuracy that the tail refit can
//!   win back, instead of either nothing or a whole class.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lip::default_k;
use crate::matio::{Dataset, LabelKind, Matrix};

/// Ratio between consecutive centroid singular values above the smallest
/// (plain geometry, used when there is no room for the pair structure).
const LADDER_RATIO: f64 = 1.047;
/// Ladder scale relative to `cluster_separation` in the structured
/// geometry. Kept low so the whole ladder maps to induced weight values
/// above the parasitic row-sum component that a one-hot fit always
/// carries (it does not shrink under label noise, so it must not be able
/// to overtake the ladder at moderate noise rates).
const LADDER_SCALE: f64 = 0.68;
/// Ratio between consecutive ladder values in the structured geometry;
/// flat, so the weakest ladder component keeps its margin too.
const STRONG_RATIO: f64 = 1.018;
/// Target ratio between the two largest induced weight singular values.
const TOP_GAP: f64 = 1.27;
/// Cap on the dominant induced weight value relative to the peak of
/// m / (m^2 + l sigma^2); the gap target saturates at this cap.
const PEAK_FRACTION: f64 = 0.98;
/// Largest centroid singular value (the designated-pair component)
/// relative to `cluster_separation`.
const PAIR_FACTOR: f64 = 1.5;
/// Fallback half-margin, in within-class-sigma units, that the designated
/// pair keeps when its dedicated component is removed.
const PAIR_FALLBACK_Z: f64 = 3.5;
/// Smallest allowed centroid distance outside the designated pair,
/// relative to `cluster_separation`; draws below it are redrawn.
const MIN_SEPARATION_FACTOR: f64 = 0.5;
/// Redraw budget for the minimum-separation guard; the best draw seen is
/// used if the guard is never met, keeping generation total.
const GEOMETRY_DRAWS: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Total sample count across both splits; must be at least `2 * l`.
    pub n: usize,
    /// Feature dimension.
    pub q: usize,
    /// Class count.
    pub l: usize,
    /// Scale of the centroid spectrum; typical pairwise centroid distance
    /// grows proportionally to it.
    pub cluster_separation: f64,
    /// Isotropic noise scale around each centroid; 0 gives point clusters.
    pub within_class_sigma: f64,
    pub seed: u64,
    /// Fraction of each class assigned to the train split, in (0, 1).
    pub train_fraction: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.q == 0 {
            return Err(Error::Config(format!(
                "class and feature counts must be positive, got l = {}, q = {}",
                self.l, self.q
            )));
        }
        if self.n < 2 * self.l {
            return Err(Error::Config(format!(
                "n must be at least 2 * l so every class lands in both splits, got n = {}, l = {}",
                self.n, self.l
            )));
        }
        if !self.cluster_separation.is_finite() || self.cluster_separation <= 0.0 {
            return Err(Error::Config(format!(
                "cluster_separation must be finite and positive, got {}",
                self.cluster_separation
            )));
        }
        if !self.within_class_sigma.is_finite() || self.within_class_sigma < 0.0 {
            return Err(Error::Config(format!(
                "within_class_sigma must be finite and non-negative, got {}",
                self.within_class_sigma
            )));
        }
        if !self.train_fraction.is_finite()
            || self.train_fraction <= 0.0
            || self.train_fraction >= 1.0
        {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly inside (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Orthonormal basis of a random `rows x cols` subspace; with `centered`
/// the basis is orthogonal to the all-ones vector (requires cols < rows).
fn random_basis(rng: &mut ChaCha8Rng, rows: usize, cols: usize, centered: bool) -> Result<Matrix> {
    loop {
        let mut g = Matrix::zeros((rows, cols));
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if centered {
            for mut col in g.columns_mut() {
                let mean = col.sum() / rows as f64;
                col.mapv_inplace(|v| v - mean);
            }
        }
        let (u, s, _) = linalg::thin_svd(&g)?;
        // Rank-deficient draws have probability zero; redraw just in case.
        if s[cols - 1] > 1e-9 {
            return Ok(u);
        }
    }
}

/// Smallest centroid singular value, placed so the largest induced weight
/// singular value sits `TOP_GAP` above the one induced by `base`. The
/// induced value for a centroid direction of strength m is
/// m / (m^2 + l sigma^2); it decreases in m on the strong side, so the
/// smallest m yields the dominant weight component.
fn dominant_centroid_value(base: f64, sigma: f64, l: usize) -> f64 {
    let ls2 = l as f64 * sigma * sigma;
    let induced = |v: f64| v / (v * v + ls2);
    // The induced value peaks at 1 / (2 sigma sqrt(l)); saturate the gap
    // target slightly below the peak so the solve stays well-conditioned.
    let mut target = TOP_GAP * induced(base);
    if sigma > 0.0 {
        target = target.min(PEAK_FRACTION / (2.0 * sigma * (l as f64).sqrt()));
    }
    let disc = 1.0 - 4.0 * target * target * ls2;
    if sigma == 0.0 || disc <= 0.0 {
        // Degenerate regimes (point clusters, or separation at the noise
        // scale): fall back to a plain gap below the ladder.
        base / TOP_GAP
    } else {
        // Larger root: the solution on the decreasing branch.
        let root = (1.0 + disc.sqrt()) / (2.0 * target);
        if root < base {
            root
        } else {
            base / TOP_GAP
        }
    }
}

/// Ascending centroid singular values for the plain geometry: a geometric
/// ladder starting at `sep`, plus the dominant-component value below it.
fn centroid_spectrum(rank: usize, sep: f64, sigma: f64, l: usize) -> Vec<f64> {
    if rank == 1 {
        return vec![sep];
    }
    let mut m = Vec::with_capacity(rank);
    m.push(dominant_centroid_value(sep, sigma, l));
    for i in 0..rank - 1 {
        m.push(sep * LADDER_RATIO.powi(i as i32));
    }
    m
}

/// Class-side geometry with the designated pair (classes l-2 and l-1).
/// Returns centroid coordinates scaled by the singular values, as an
/// l x r matrix with exactly orthogonal columns of norms `m`.
///
/// Construction: l-1 anchor rows (one shared by the pair) are drawn
/// Gaussian, centered against the pair-weighted ones vector, and
/// orthonormalized, which makes the expanded l-row matrix orthonormal,
/// centered, and orthogonal to the pair contrast. The pair contrast is
/// then rotated into one mid-ladder column by the angle that leaves the
/// pair a `PAIR_FALLBACK_Z`-sigma fallback margin, and the residual
/// contrast becomes the pair component with the largest centroid value.
fn structured_class_geometry(
    rng: &mut ChaCha8Rng,
    l: usize,
    r: usize,
    sep: f64,
    sigma: f64,
) -> Result<Matrix> {
    let cols = r - 1;
    let anchors = l - 1;
    let sqrt2 = std::f64::consts::SQRT_2;

    let base = LADDER_SCALE * sep;
    let mut m = Vec::with_capacity(r);
    m.push(dominant_centroid_value(base, sigma, l));
    for i in 0..cols - 1 {
        m.push(base * STRONG_RATIO.powi(i as i32));
    }
    m.push(PAIR_FACTOR * sep);

    // Ladder column that carries the pair's fallback margin.
    let j_star = 1 + (cols - 1) / 4;
    let fallback = 2.0 * PAIR_FALLBACK_Z * sigma;
    let s_leak = fallback / (sqrt2 * m[j_star]);
    let t_leak = (1.0 - s_leak * s_leak).sqrt();

    let mut best: Option<(f64, Matrix)> = None;
    for _ in 0..GEOMETRY_DRAWS {
        // Anchor basis: orthonormal columns orthogonal to the weighted
        // ones vector (the shared pair anchor counts twice).
        let mut weights = vec![1.0; anchors];
        weights[anchors - 1] = sqrt2;
        let wnorm2 = l as f64;
        // The fallback column is drawn with a zero shared-anchor entry, so
        // the pair classes carry none of its backbone content and sit at
        // exactly +-s_leak / sqrt(2) there after the rotation below. A
        // nonzero shared entry would shift both pair classes by the same
        // amount along this column; once the pair component is truncated
        // away nothing compensates the shift, and it can push both class
        // means onto the same side of their decision boundary.
        let q_s = loop {
            let mut g = vec![0.0; anchors];
            for v in g.iter_mut().take(anchors - 1) {
                *v = rng.sample(StandardNormal);
            }
            let mean = g[..anchors - 1].iter().sum::<f64>() / (anchors - 1) as f64;
            for v in g.iter_mut().take(anchors - 1) {
                *v -= mean;
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-9 {
                for v in g.iter_mut() {
                    *v /= norm;
                }
                break g;
            }
        };
        let base = loop {
            let mut g = Matrix::zeros((anchors, cols - 1));
            for v in g.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            for mut col in g.columns_mut() {
                let dot: f64 = col.iter().zip(&weights).map(|(v, w)| v * w).sum();
                for (v, w) in col.iter_mut().zip(&weights) {
                    *v -= dot / wnorm2 * w;
                }
                let qdot: f64 = col.iter().zip(&q_s).map(|(v, qv)| v * qv).sum();
                for (v, qv) in col.iter_mut().zip(&q_s) {
                    *v -= qdot * qv;
                }
            }
            let (u, s, _) = linalg::thin_svd(&g)?;
            if s[cols - 2] > 1e-9 {
                break u;
            }
        };

        // Anchor entry for backbone column j: the fallback column comes
        // from the separately drawn q_s, the rest from the orthonormal
        // block (which is orthogonal to both q_s and the weights).
        let anchor_entry = |row: usize, j: usize| -> f64 {
            if j == j_star {
                q_s[row]
            } else {
                let col = if j < j_star { j } else { j - 1 };
                base[(row, col)]
            }
        };
        let mut u = Matrix::zeros((l, r));
        for j in 0..cols {
            for c in 0..l - 2 {
                u[(c, j)] = anchor_entry(c, j);
            }
            let shared = anchor_entry(anchors - 1, j) / sqrt2;
            u[(l - 2, j)] = shared;
            u[(l - 1, j)] = shared;
        }
        // Rotate the pair contrast into column j_star; the residual
        // contrast is the pair component.
        for c in 0..l {
            let contrast = match c {
                _ if c == l - 2 => 1.0 / sqrt2,
                _ if c == l - 1 => -1.0 / sqrt2,
                _ => 0.0,
            };
            let b = u[(c, j_star)];
            u[(c, j_star)] = t_leak * b + s_leak * contrast;
            u[(c, r - 1)] = t_leak * contrast - s_leak * b;
        }
        for (j, mut col) in u.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * m[j]);
        }

        // Minimum-separation guard over all pairs except the designated
        // one, which is separated by its dedicated component.
        let mut min_dist = f64::INFINITY;
        for a in 0..l {
            for b in a + 1..l {
                if a == l - 2 && b == l - 1 {
                    continue;
                }
                let mut d2 = 0.0;
                for j in 0..r {
                    let d = u[(a, j)] - u[(b, j)];
                    d2 += d * d;
                }
                min_dist = min_dist.min(d2.sqrt());
            }
        }
        if min_dist >= MIN_SEPARATION_FACTOR * sep {
            return Ok(u);
        }
        if best.as_ref().map_or(true, |(d, _)| min_dist > *d) {
            best = Some((min_dist, u));
        }
    }
    Ok(best.expect("at least one draw").1)
}

/// Generates `(train, test)` with a stratified split: every class appears in
/// both splits. Deterministic given the seed; rows are grouped by class.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, q, l) = (spec.n, spec.q, spec.l);
    let (sep, sigma) = (spec.cluster_separation, spec.within_class_sigma);

    let structured_rank = (default_k(q, l) + 1).min(q.min(l)).min(l.saturating_sub(1));
    // The structured geometry needs room for its components and a
    // separation-to-sigma ratio that keeps every component on the strong
    // side of the induced-weight peak.
    let structured = l >= 6 && structured_rank >= 4 && sep * sep > 4.0 * l as f64 * sigma * sigma;

    let (scaled, rank) = if structured {
        (
            structured_class_geometry(&mut rng, l, structured_rank, sep, sigma)?,
            structured_rank,
        )
    } else {
        let rank = default_k(q, l);
        let class_basis = random_basis(&mut rng, l, rank, rank < l)?;
        let m = centroid_spectrum(rank, sep, sigma, l);
        let mut scaled = class_basis;
        for (i, mut col) in scaled.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * m[i]);
        }
        (scaled, rank)
    };
    let feature_basis = random_basis(&mut rng, q, rank, false)?;
    let centroids = scaled.dot(&feature_basis.t());

    let mut split = [
        (Vec::<f64>::new(), Vec::<f64>::new(), 0usize),
        (Vec::<f64>::new(), Vec::<f64>::new(), 0usize),
    ];
    for c in 0..l {
        let n_c = n / l + usize::from(c < n % l);
        let train_c = ((spec.train_fraction * n_c as f64).round() as usize).clamp(1, n_c - 1);
        for s in 0..n_c {
            let (features, labels, rows) = &mut split[usize::from(s >= train_c)];
            for j in 0..q {
                let eps: f64 = rng.sample(StandardNormal);
                features.push(centroids[(c, j)] + spec.within_class_sigma * eps);
            }
            for j in 0..l {
                labels.push(if j == c { 1.0 } else { 0.0 });
            }
            *rows += 1;
        }
    }

    let build = |(features, labels, rows): (Vec<f64>, Vec<f64>, usize)| Dataset {
        features: Matrix::from_shape_vec((rows, q), features).expect("row-major fill"),
        labels: Matrix::from_shape_vec((rows, l), labels).expect("row-major fill"),
        label_kind: LabelKind::OneHotTruth,
    };
    let [train, test] = split;
    Ok((build(train), build(test)))
}
