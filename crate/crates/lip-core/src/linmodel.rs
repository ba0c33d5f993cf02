//! Ridge-regression classifier on one-hot (or candidate-set) label targets.
//!
//! Training solves the normal equations in closed form:
//! `W = (X^T X + lambda I)^-1 X^T Y`, fit via Cholesky on the regularized
//! Gram matrix. Prediction assigns each sample the class with the largest
//! score, breaking ties toward the lowest class index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matio::{ensure_finite, validate_one_hot, Matrix};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RidgeConfig {
    /// Tikhonov regularization strength; must be finite and non-negative.
    pub lambda: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { lambda: 1.0 }
    }
}

/// How the normal equations were solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Cholesky factorization of the regularized Gram matrix.
    Cholesky,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Weight matrix, `q x l`.
    pub weights: Matrix,
    pub method: SolveMethod,
}

/// Fits `W = (X^T X + lambda I)^-1 X^T Y`.
///
/// `y` may be real-valued; it is not restricted to 0/1 entries. Fails with a
/// numerical error naming the smallest Gram eigenvalue when
/// `X^T X + lambda I` is not positive definite.
pub fn ridge_fit(x: &Matrix, y: &Matrix, cfg: &RidgeConfig) -> Result<FitResult> {
    if x.nrows() != y.nrows() {
        return Err(Error::Shape(format!(
            "ridge_fit: X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::Shape(format!(
            "ridge_fit: degenerate shapes X {} x {}, Y {} x {}",
            x.nrows(),
            x.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    if !cfg.lambda.is_finite() || cfg.lambda < 0.0 {
        return Err(Error::Config(format!(
            "lambda must be finite and non-negative, got {}",
            cfg.lambda
        )));
    }
    ensure_finite(x, "ridge_fit features")?;
    ensure_finite(y, "ridge_fit targets")?;

    let q = x.ncols();
    let mut gram = x.t().dot(x);
    for i in 0..q {
        gram[(i, i)] += cfg.lambda;
    }
    let rhs = x.t().dot(y);
    let weights = linalg::spd_solve(&gram, &rhs, cfg.lambda)?;
    Ok(FitResult {
        weights,
        method: SolveMethod::Cholesky,
    })
}

/// Predicted class index per sample: argmax over columns of `X W`, ties
/// broken toward the lowest index.
pub fn predict(x: &Matrix, w: &Matrix) -> Result<Vec<usize>> {
    if x.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "predict: X has {} columns but W has {} rows",
            x.ncols(),
            w.nrows()
        )));
    }
    if w.ncols() == 0 {
        return Err(Error::Shape("predict: W has no columns".to_string()));
    }
    ensure_finite(x, "predict features")?;
    ensure_finite(w, "predict weights")?;
    let scores = x.dot(w);
    Ok(scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_score = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > best_score {
                    best = j;
                    best_score = v;
                }
            }
            best
        })
        .collect())
}

/// Fraction of predictions matching the one-hot truth `g`.
pub fn accuracy(pred: &[usize], g: &Matrix) -> Result<f64> {
    if pred.len() != g.nrows() {
        return Err(Error::Shape(format!(
            "accuracy: {} predictions but {} truth rows",
            pred.len(),
            g.nrows()
        )));
    }
    if g.nrows() == 0 {
        return Err(Error::Shape("accuracy: empty truth matrix".to_string()));
    }
    validate_one_hot(g, "accuracy truth labels")?;
    let l = g.ncols();
    let mut hits = 0usize;
    for (i, &p) in pred.iter().enumerate() {
        if p >= l {
            return Err(Error::Config(format!(
                "accuracy: prediction {p} out of range for {l} classes at row {}",
                i + 1
            )));
        }
        if g[(i, p)] == 1.0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / pred.len() as f64)
}

/// Residual of the normal equations, `||(X^T X + lambda I) W - X^T Y||_F`.
/// Exposed for diagnostics and tests.
pub fn normal_equation_residual(x: &Matrix, y: &Matrix, w: &Matrix, lambda: f64) -> f64 {
    let q = x.ncols();
    let mut gram = x.t().dot(x);
    for i in 0..q {
        gram[(i, i)] += lambda;
    }
    let lhs = gram.dot(w);
    let rhs = x.t().dot(y);
    linalg::frob(&(lhs - rhs))
}

/// Frobenius norm of `X W - Y`, the fit objective both repair stages are
/// measured against.
pub fn fit_objective(x: &Matrix, y: &Matrix, w: &Matrix) -> Result<f64> {
    if x.ncols() != w.nrows() || x.nrows() != y.nrows() || w.ncols() != y.ncols() {
        return Err(Error::Shape(format!(
            "fit_objective: X {} x {}, W {} x {}, Y {} x {}",
            x.nrows(),
            x.ncols(),
            w.nrows(),
            w.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let diff = x.dot(w) - y;
    Ok(linalg::frob(&diff))
}
