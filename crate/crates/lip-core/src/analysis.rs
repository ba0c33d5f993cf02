//! Diagnostics for how label corruption perturbs ridge weights: spectra,
//! principal-subspace similarity, and perturbation bounds.
//!
//! The central identity: with `K = X^T X + lambda I`, corrupting labels by a
//! mask `M` (so `Y = G + M`) shifts the ridge solution by exactly
//! `Delta W = K^-1 X^T M`. Its size is controlled a priori by
//!
//! `||Delta W||_F <= sigma_max(X) sqrt(n l) / (lambda_min(X^T X) + lambda) * sqrt(p)`
//!
//! at flip rate `p`, and the rotation of the top-`k` right singular subspace
//! obeys the Davis-Kahan style bound `sin(theta) <= ||Delta W||_2 / delta`
//! for a spectral gap `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::linmodel::{ridge_fit, RidgeConfig};
use crate::lip::svd_thin;
use crate::matio::{ensure_finite, render_matrix, Matrix};
use crate::noise::mask_frobenius;

/// Singular values of `w` in non-increasing order.
pub fn spectrum(w: &Matrix) -> Result<Vec<f64>> {
    Ok(svd_thin(w)?.s)
}

const ORTHONORMAL_TOL: f64 = 1e-8;

fn check_orthonormal(v: &Matrix, what: &str) -> Result<()> {
    if v.nrows() == 0 || v.ncols() == 0 {
        return Err(Error::Shape(format!(
            "{what}: degenerate shape {} x {}",
            v.nrows(),
            v.ncols()
        )));
    }
    ensure_finite(v, what)?;
    let gram = v.t().dot(v);
    let mut deviation = 0.0f64;
    for ((a, b), &val) in gram.indexed_iter() {
        let target = if a == b { 1.0 } else { 0.0 };
        deviation = deviation.max((val - target).abs());
    }
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal {
            deviation,
            tol: ORTHONORMAL_TOL,
        });
    }
    Ok(())
}

/// Similarity between the spans of the first `i` columns of `v` and the
/// first `j` columns of `v_prime`:
///
/// `phi = ||V[:, :i]^T V'[:, :j]||_F^2 / min(i, j)`,
///
/// which is 1 when one span contains the other and 0 when they are
/// orthogonal. Columns of both inputs must be orthonormal within 1e-8.
pub fn subspace_similarity(v: &Matrix, v_prime: &Matrix, i: usize, j: usize) -> Result<f64> {
    if v.nrows() != v_prime.nrows() {
        return Err(Error::Shape(format!(
            "subspace_similarity: ambient dimensions differ ({} vs {})",
            v.nrows(),
            v_prime.nrows()
        )));
    }
    if i == 0 || j == 0 || i > v.ncols() || j > v_prime.ncols() {
        return Err(Error::Config(format!(
            "subspace_similarity: (i, j) = ({i}, {j}) outside [1, {}] x [1, {}]",
            v.ncols(),
            v_prime.ncols()
        )));
    }
    check_orthonormal(v, "subspace_similarity V")?;
    check_orthonormal(v_prime, "subspace_similarity V'")?;
    let c = v
        .slice(ndarray::s![.., ..i])
        .t()
        .dot(&v_prime.slice(ndarray::s![.., ..j]));
    let sq: f64 = c.iter().map(|x| x * x).sum();
    Ok(sq / i.min(j) as f64)
}

/// Similarity evaluated on the full grid `(i, j) in [1, i_max] x [1, j_max]`.
#[derive(Debug, Clone)]
pub struct SimilarityGrid {
    pub i_max: usize,
    pub j_max: usize,
    /// `phi[(a, b)]` is the similarity at `i = a + 1`, `j = b + 1`.
    pub phi: Matrix,
}

impl SimilarityGrid {
    /// Plain `i_max x j_max` CSV table, loadable with `matio::load_matrix`.
    pub fn to_csv(&self) -> String {
        render_matrix(&self.phi)
    }
}

/// Computes the whole similarity grid in one pass via prefix sums over the
/// squared cross-Gram entries.
pub fn similarity_grid(
    v: &Matrix,
    v_prime: &Matrix,
    i_max: usize,
    j_max: usize,
) -> Result<SimilarityGrid> {
    if v.nrows() != v_prime.nrows() {
        return Err(Error::Shape(format!(
            "similarity_grid: ambient dimensions differ ({} vs {})",
            v.nrows(),
            v_prime.nrows()
        )));
    }
    if i_max == 0 || j_max == 0 || i_max > v.ncols() || j_max > v_prime.ncols() {
        return Err(Error::Config(format!(
            "similarity_grid: (i_max, j_max) = ({i_max}, {j_max}) outside [1, {}] x [1, {}]",
            v.ncols(),
            v_prime.ncols()
        )));
    }
    check_orthonormal(v, "similarity_grid V")?;
    check_orthonormal(v_prime, "similarity_grid V'")?;
    let c = v
        .slice(ndarray::s![.., ..i_max])
        .t()
        .dot(&v_prime.slice(ndarray::s![.., ..j_max]));
    let mut phi = Matrix::zeros((i_max, j_max));
    // prefix[(a, b)] accumulates sum of c^2 over rows <= a, cols <= b.
    let mut prefix = Matrix::zeros((i_max, j_max));
    for a in 0..i_max {
        let mut row_acc = 0.0;
        for b in 0..j_max {
            row_acc += c[(a, b)] * c[(a, b)];
            prefix[(a, b)] = row_acc + if a > 0 { prefix[(a - 1, b)] } else { 0.0 };
            phi[(a, b)] = prefix[(a, b)] / (a + 1).min(b + 1) as f64;
        }
    }
    Ok(SimilarityGrid { i_max, j_max, phi })
}

/// Exact ridge-weight shift caused by a corruption mask:
/// `Delta W = (X^T X + lambda I)^-1 X^T M`, equal to
/// `ridge_fit(X, G + M) - ridge_fit(X, G)` without running either fit.
pub fn perturbation_delta(x: &Matrix, g: &Matrix, m: &Matrix, lambda: f64) -> Result<Matrix> {
    if x.nrows() != m.nrows() || g.nrows() != m.nrows() || g.ncols() != m.ncols() {
        return Err(Error::Shape(format!(
            "perturbation_delta: X {} x {}, G {} x {}, M {} x {}",
            x.nrows(),
            x.ncols(),
            g.nrows(),
            g.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    mask_frobenius(m)?;
    // Solving against M reuses the ridge path with M as the target.
    let fit = ridge_fit(x, m, &RidgeConfig { lambda })?;
    Ok(fit.weights)
}

/// A priori Frobenius bound on the ridge-weight shift at flip rate `p`:
/// `sigma_max(X) sqrt(n l) / (lambda_min(X^T X) + lambda) * sqrt(p)`.
pub fn frobenius_bound(x: &Matrix, lambda: f64, p: f64, n: usize, l: usize) -> Result<f64> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!(
            "flip rate p must lie in [0, 1], got {p}"
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Config(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if n == 0 || l == 0 {
        return Err(Error::Config(format!(
            "n and l must be positive, got n = {n}, l = {l}"
        )));
    }
    ensure_finite(x, "frobenius_bound features")?;
    if p == 0.0 {
        return Ok(0.0);
    }
    let sigma_max = linalg::spectral_norm(x)?;
    let gram = x.t().dot(x);
    // Clamp: the Gram matrix is PSD, tiny negative eigenvalues are noise.
    let lambda_min = linalg::eigh_min(&gram)?.max(0.0);
    Ok(sigma_max * ((n * l) as f64).sqrt() / (lambda_min + lambda) * p.sqrt())
}

/// Largest principal angle between two orthonormal column spans of equal
/// dimension, as `sin(theta) = sqrt(1 - s_min(V_k^T V'_k)^2)`, clamped into
/// `[0, 1]`.
pub fn sin_theta(v_k: &Matrix, v_prime_k: &Matrix) -> Result<f64> {
    if v_k.nrows() != v_prime_k.nrows() || v_k.ncols() != v_prime_k.ncols() {
        return Err(Error::Shape(format!(
            "sin_theta: shapes {} x {} vs {} x {} must match",
            v_k.nrows(),
            v_k.ncols(),
            v_prime_k.nrows(),
            v_prime_k.ncols()
        )));
    }
    check_orthonormal(v_k, "sin_theta V_k")?;
    check_orthonormal(v_prime_k, "sin_theta V'_k")?;
    let c = v_k.t().dot(v_prime_k);
    let (_, s, _) = linalg::thin_svd(&c)?;
    let s_min = s.last().copied().unwrap_or(0.0).min(1.0);
    Ok((1.0 - s_min * s_min).max(0.0).sqrt())
}

/// Subspace-rotation bound `||Delta W||_2 / delta` for a positive spectral
/// gap `delta`. Deliberately not capped at 1: values above 1 mean the bound
/// is vacuous for that instance, which is information the caller may want.
pub fn davis_kahan_bound(delta_w_spec: f64, delta_gap: f64) -> Result<f64> {
    if !delta_w_spec.is_finite() || delta_w_spec < 0.0 {
        return Err(Error::Config(format!(
            "perturbation norm must be finite and non-negative, got {delta_w_spec}"
        )));
    }
    if !delta_gap.is_finite() || delta_gap <= 0.0 {
        return Err(Error::NonPositiveGap { gap: delta_gap });
    }
    Ok(delta_w_spec / delta_gap)
}

/// Everything measured and predicted about one corruption instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    /// `||Delta W||_F`, measured.
    pub delta_w_frob: f64,
    /// `||Delta W||_2`, measured.
    pub delta_w_spec: f64,
    /// A priori Frobenius bound at the realized flip rate.
    pub frob_bound: f64,
    /// Largest principal angle between the top-`k` right singular subspaces
    /// of the clean and corrupted weights.
    pub sin_theta_measured: f64,
    /// A priori rotation bound `frob_bound / delta_gap`.
    pub sin_theta_bound: f64,
    /// Spectral gap `sigma_k(W) - sigma_{k+1}(W)` of the clean weights.
    pub delta_gap: f64,
    /// Realized flip rate the bound was evaluated at.
    pub p_used: f64,
    pub sigma_max_x: f64,
    pub lambda_min_gram: f64,
}

/// Fits clean weights on `(x, g)`, derives the perturbation from the mask
/// `m`, and assembles measured quantities next to their a priori bounds.
pub fn bound_report(x: &Matrix, g: &Matrix, m: &Matrix, lambda: f64, k: usize) -> Result<BoundReport> {
    if g.nrows() != m.nrows() || g.ncols() != m.ncols() {
        return Err(Error::Shape(format!(
            "bound_report: G is {} x {} but M is {} x {}",
            g.nrows(),
            g.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    let (n, l) = (g.nrows(), g.ncols());
    let mask_norm = mask_frobenius(m)?;
    let p_used = (mask_norm * mask_norm) / (n * l) as f64;

    let w = ridge_fit(x, g, &RidgeConfig { lambda })?.weights;
    let delta_w = perturbation_delta(x, g, m, lambda)?;
    let w_prime = &w + &delta_w;

    let clean = svd_thin(&w)?;
    let noisy = svd_thin(&w_prime)?;
    let r = clean.rank_dim();
    if k == 0 || k > r {
        return Err(Error::Config(format!(
            "bound_report: k must lie in [1, {r}], got {k}"
        )));
    }
    let next = if k < r { clean.s[k] } else { 0.0 };
    let delta_gap = clean.s[k - 1] - next;

    let sin_theta_measured = sin_theta(
        &clean.v.slice(ndarray::s![.., ..k]).to_owned(),
        &noisy.v.slice(ndarray::s![.., ..k]).to_owned(),
    )?;

    let frob_bound = frobenius_bound(x, lambda, p_used, n, l)?;
    let sin_theta_bound = if delta_gap > 0.0 {
        frob_bound / delta_gap
    } else {
        f64::INFINITY
    };

    let gram = x.t().dot(x);
    Ok(BoundReport {
        delta_w_frob: linalg::frob(&delta_w),
        delta_w_spec: linalg::spectral_norm(&delta_w)?,
        frob_bound,
        sin_theta_measured,
        sin_theta_bound,
        delta_gap,
        p_used,
        sigma_max_x: linalg::spectral_norm(x)?,
        lambda_min_gram: linalg::eigh_min(&gram)?.max(0.0),
    })
}

/// Singular-value spectra of several weight matrices side by side, with an
/// optional accuracy per run.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub labels: Vec<String>,
    pub accuracies: Vec<Option<f64>>,
    pub spectra: Vec<Vec<f64>>,
}

impl SpectrumReport {
    pub fn new(
        labels: Vec<String>,
        accuracies: Vec<Option<f64>>,
        spectra: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if labels.len() != spectra.len() || labels.len() != accuracies.len() {
            return Err(Error::Config(format!(
                "spectrum report: {} labels, {} accuracies, {} spectra",
                labels.len(),
                accuracies.len(),
                spectra.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Config("spectrum report: no runs".to_string()));
        }
        Ok(SpectrumReport {
            labels,
            accuracies,
            spectra,
        })
    }

    /// CSV with one column per run: line 1 run labels, line 2 accuracies
    /// (empty cell when not computed), then singular values largest-first,
    /// padded with empty cells when runs have different ranks.
    pub fn to_csv(&self) -> String {
        let sanitize = |s: &str| s.replace([',', '\n', '\r'], "_");
        let mut out = String::new();
        out.push_str(
            &self
                .labels
                .iter()
                .map(|s| sanitize(s))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        out.push_str(
            &self
                .accuracies
                .iter()
                .map(|a| a.map_or(String::new(), |v| format!("{v}")))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        let depth = self.spectra.iter().map(|s| s.len()).max().unwrap_or(0);
        for row in 0..depth {
            let line = self
                .spectra
                .iter()
                .map(|s| s.get(row).map_or(String::new(), |v| format!("{v}")))
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}
