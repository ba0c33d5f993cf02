//! Shared fixtures and independent oracles for the integration tests.

#![allow(dead_code)]

use lip_core::Matrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// One-hot labels with a uniformly random class per row.
pub fn one_hot(rng: &mut ChaCha8Rng, n: usize, l: usize) -> Matrix {
    let mut g = Matrix::zeros((n, l));
    for i in 0..n {
        g[(i, rng.gen_range(0..l))] = 1.0;
    }
    g
}

pub fn frob(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Dense linear solve by Gaussian elimination with partial pivoting.
/// Deliberately naive: this is the oracle the Cholesky path is checked
/// against, so it shares no code with the library.
pub fn solve_dense(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "oracle solve needs a square system");
    assert_eq!(b.nrows(), n);
    let m = b.ncols();
    let mut aug = Matrix::zeros((n, n + m));
    aug.slice_mut(ndarray::s![.., ..n]).assign(a);
    aug.slice_mut(ndarray::s![.., n..]).assign(b);
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if aug[(row, col)].abs() > aug[(pivot, col)].abs() {
                pivot = row;
            }
        }
        assert!(aug[(pivot, col)].abs() > 0.0, "oracle solve hit a zero pivot");
        if pivot != col {
            for j in 0..n + m {
                let tmp = aug[(col, j)];
                aug[(col, j)] = aug[(pivot, j)];
                aug[(pivot, j)] = tmp;
            }
        }
        for row in col + 1..n {
            let factor = aug[(row, col)] / aug[(col, col)];
            for j in col..n + m {
                aug[(row, j)] -= factor * aug[(col, j)];
            }
        }
    }
    let mut x = Matrix::zeros((n, m));
    for rhs in 0..m {
        for row in (0..n).rev() {
            let mut acc = aug[(row, n + rhs)];
            for j in row + 1..n {
                acc -= aug[(row, j)] * x[(j, rhs)];
            }
            x[(row, rhs)] = acc / aug[(row, row)];
        }
    }
    x
}
