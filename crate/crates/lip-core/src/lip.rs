//! Post-hoc repair of a weight matrix trained on corrupted labels.
//!
//! The repair has two stages, both operating on the already-trained matrix
//! `W'` without re-running the solver:
//!
//! 1. Principal subspace preservation: truncate the thin SVD of `W'` to its
//!    top `k` components, `W_k = U_k S_k V_k^T`. Label noise perturbs the
//!    trailing components first, so the leading subspace is kept as-is.
//! 2. Trailing-value refit: holding every singular vector fixed, refit each
//!    trailing singular value in closed form against the training data. For
//!    tail component `j`, the least-squares objective `||X W - Y||_F^2` is
//!    quadratic in `sigma_j` alone, minimized by
//!    `sigma_j* = u_j^T X^T (Y - X W_k) v_j / (u_j^T X^T X u_j)`.
//!
//! The repaired matrix is `W* = W_k + U_tail diag(sigma*) V_tail^T`. By
//! construction `||X W* - Y||_F <= ||X W_k - Y||_F`: each refit value
//! minimizes the objective along its own direction and zero is always a
//! candidate.

use ndarray::s;

use crate::error::{Error, Result};
use crate::linalg;
use crate::linmodel::{accuracy, predict};
use crate::matio::{ensure_finite, Matrix};

/// Thin SVD factors with a deterministic sign convention: within each column
/// of `v`, the entry of largest magnitude (ties broken toward the lowest
/// index) is non-negative, and `u` columns are negated to match.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// Left singular vectors, `q x r`.
    pub u: Matrix,
    /// Singular values in non-increasing order, length `r = min(q, l)`.
    pub s: Vec<f64>,
    /// Right singular vectors, `l x r`.
    pub v: Matrix,
}

impl SvdFactors {
    pub fn rank_dim(&self) -> usize {
        self.s.len()
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LipConfig {
    /// Number of leading singular components preserved verbatim.
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct LipResult {
    /// Rank-`k` truncation `W_k` of the input weights.
    pub w_k: Matrix,
    /// Refit trailing singular values, length `min(q, l) - k`. Values may be
    /// negative: each is the unconstrained minimizer along its direction.
    pub refit_tail: Vec<f64>,
    /// Repaired weights `W* = W_k + U_tail diag(refit_tail) V_tail^T`.
    pub w_star: Matrix,
    /// Absolute component indices (0-based, in `k..min(q, l)`) whose refit
    /// denominator vanished; their refit value is 0.
    pub skipped_indices: Vec<usize>,
}

/// Default preserved-component count: `ceil(0.8 * l)`, clamped to
/// `[1, min(q, l)]`. Expects `q, l >= 1`.
pub fn default_k(q: usize, l: usize) -> usize {
    let ceil = (4 * l + 4) / 5;
    ceil.clamp(1, q.min(l).max(1))
}

/// Thin SVD with the deterministic sign convention described on
/// [`SvdFactors`]. Rejects non-finite input.
pub fn svd_thin(w: &Matrix) -> Result<SvdFactors> {
    if w.nrows() == 0 || w.ncols() == 0 {
        return Err(Error::Shape(format!(
            "svd_thin: degenerate shape {} x {}",
            w.nrows(),
            w.ncols()
        )));
    }
    ensure_finite(w, "svd_thin input")?;
    let (mut u, s, mut v) = linalg::thin_svd(w)?;
    for j in 0..s.len() {
        let col = v.column(j);
        let mut anchor = 0usize;
        let mut best = col[0].abs();
        for (i, &val) in col.iter().enumerate().skip(1) {
            if val.abs() > best {
                anchor = i;
                best = val.abs();
            }
        }
        if v[(anchor, j)] < 0.0 {
            v.column_mut(j).mapv_inplace(|x| -x);
            u.column_mut(j).mapv_inplace(|x| -x);
        }
    }
    Ok(SvdFactors { u, s, v })
}

fn check_k(k: usize, rank_dim: usize) -> Result<()> {
    if k == 0 || k > rank_dim {
        return Err(Error::Config(format!(
            "k must lie in [1, {rank_dim}], got {k}"
        )));
    }
    Ok(())
}

/// Rank-`k` truncation of `w_prime`: returns `W_k` together with the full
/// factors so the trailing components can be refit afterwards.
pub fn psp(w_prime: &Matrix, cfg: &LipConfig) -> Result<(Matrix, SvdFactors)> {
    let factors = svd_thin(w_prime)?;
    check_k(cfg.k, factors.rank_dim())?;
    let k = cfg.k;
    let mut scaled = factors.u.slice(s![.., ..k]).to_owned();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|x| x * factors.s[j]);
    }
    let w_k = scaled.dot(&factors.v.slice(s![.., ..k]).t());
    Ok((w_k, factors))
}

/// Closed-form refit of the trailing singular values against `(x, y)`,
/// holding the singular vectors of `factors` fixed and the leading rank-`k`
/// part `w_k` unchanged.
///
/// Returns the refit values and the absolute indices of components whose
/// denominator `||X u_j||^2` fell at or below `1e-12 * ||X||_F^2` (those
/// values are set to 0 rather than divided out).
pub fn lap(
    x: &Matrix,
    y: &Matrix,
    w_k: &Matrix,
    factors: &SvdFactors,
    k: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let (n, q) = (x.nrows(), x.ncols());
    let l = y.ncols();
    if y.nrows() != n {
        return Err(Error::Shape(format!(
            "lap: X has {n} rows but Y has {}",
            y.nrows()
        )));
    }
    if w_k.nrows() != q || w_k.ncols() != l {
        return Err(Error::Shape(format!(
            "lap: W_k is {} x {}, expected {q} x {l}",
            w_k.nrows(),
            w_k.ncols()
        )));
    }
    if factors.u.nrows() != q || factors.v.nrows() != l {
        return Err(Error::Shape(format!(
            "lap: factors are {} x {} / {} x {}, expected row counts {q} / {l}",
            factors.u.nrows(),
            factors.u.ncols(),
            factors.v.nrows(),
            factors.v.ncols()
        )));
    }
    let r = factors.rank_dim();
    check_k(k, r)?;
    ensure_finite(x, "lap features")?;
    ensure_finite(y, "lap targets")?;

    let tail = r - k;
    if tail == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let u_tail = factors.u.slice(s![.., k..]);
    let v_tail = factors.v.slice(s![.., k..]);

    // Associativity keeps every product linear in n: X (q x t products
    // first), never forming the n x l matrix X W_k.
    let a = x.dot(&u_tail);
    let wk_v = w_k.dot(&v_tail);
    let b = y.dot(&v_tail) - x.dot(&wk_v);

    let eps_den = 1e-12 * x.iter().map(|v| v * v).sum::<f64>();
    let mut sigmas = Vec::with_capacity(tail);
    let mut skipped = Vec::new();
    for j in 0..tail {
        let aj = a.column(j);
        let den: f64 = aj.iter().map(|v| v * v).sum();
        if den <= eps_den {
            sigmas.push(0.0);
            skipped.push(k + j);
            continue;
        }
        let num: f64 = aj
            .iter()
            .zip(b.column(j).iter())
            .map(|(&ai, &bi)| ai * bi)
            .sum();
        sigmas.push(num / den);
    }
    Ok((sigmas, skipped))
}

/// Full repair: truncate `w_prime` to rank `cfg.k`, refit the trailing
/// singular values against `(x, y)`, and assemble `W*`.
pub fn lip_apply(x: &Matrix, y: &Matrix, w_prime: &Matrix, cfg: &LipConfig) -> Result<LipResult> {
    if x.ncols() != w_prime.nrows() || y.ncols() != w_prime.ncols() {
        return Err(Error::Shape(format!(
            "lip_apply: X {} x {}, Y {} x {}, W' {} x {}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols(),
            w_prime.nrows(),
            w_prime.ncols()
        )));
    }
    let (w_k, factors) = psp(w_prime, cfg)?;
    let (refit_tail, skipped_indices) = lap(x, y, &w_k, &factors, cfg.k)?;
    let k = cfg.k;
    let w_star = if refit_tail.is_empty() {
        w_k.clone()
    } else {
        let mut scaled = factors.u.slice(s![.., k..]).to_owned();
        for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|x| x * refit_tail[j]);
        }
        &w_k + &scaled.dot(&factors.v.slice(s![.., k..]).t())
    };
    Ok(LipResult {
        w_k,
        refit_tail,
        w_star,
        skipped_indices,
    })
}

/// Grid search over preserved-component counts: applies the repair for each
/// candidate `k` and scores validation accuracy against the one-hot truth
/// `g_val`. Returns the best `k`; ties break toward the smallest.
pub fn select_k(
    x_val: &Matrix,
    y_val: &Matrix,
    g_val: &Matrix,
    w_prime: &Matrix,
    candidates: &[usize],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Config(
            "select_k: candidate list is empty".to_string(),
        ));
    }
    let r = w_prime.nrows().min(w_prime.ncols());
    let mut ks: Vec<usize> = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > r) {
        return Err(Error::Config(format!(
            "select_k: candidate {bad} outside [1, {r}]"
        )));
    }
    let mut best_k = ks[0];
    let mut best_acc = f64::NEG_INFINITY;
    for &k in &ks {
        let result = lip_apply(x_val, y_val, w_prime, &LipConfig { k })?;
        let pred = predict(x_val, &result.w_star)?;
        let acc = accuracy(&pred, g_val)?;
        if acc > best_acc {
            best_acc = acc;
            best_k = k;
        }
    }
    Ok(best_k)
}
