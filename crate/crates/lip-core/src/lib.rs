//! Training-free repair of linear classifier weights learned from noisy
//! labels, plus the analysis toolkit used to study how label noise perturbs
//! ridge-regression weight matrices.
//!
//! The repair operates on an already-trained weight matrix `W'` (fit against
//! corrupted labels) without touching the training loop: keep the leading
//! singular subspace of `W'` intact, then refit the trailing singular values
//! in closed form against the training data while holding the singular
//! vectors fixed. See [`lip`] for the plug-in itself, [`linmodel`] for the
//! ridge baseline, [`noise`] for label corruption models, [`analysis`] for
//! spectrum/subspace/bound diagnostics, and [`experiment`] for the
//! reproducible sweep harness.

pub mod analysis;
pub mod error;
pub mod experiment;
mod linalg;
pub mod linmodel;
pub mod lip;
pub mod matio;
pub mod noise;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
pub use matio::Matrix;
