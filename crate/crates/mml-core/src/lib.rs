//! Core kernels for multi-level metric learning over local-descriptor
//! feature maps.
//!
//! The crate is organised around the evaluation pipeline:
//!
//! * [`tensor`] — minimal dense linear-algebra kernels (cosine correlation
//!   matrices, row-wise top-k sums, moments, Cholesky, Jacobi eigensolver).
//! * [`descriptors`] — the two descriptor views of a `C×H×W` feature map:
//!   pixel-level (`C×HW`) and part-level (`HW×C`), with support-class pooling.
//! * [`metrics`] — the three similarity branches: part-level and pixel-level
//!   top-k cosine scores, and distribution-level Gaussian divergences
//!   (KL, exact and approximate 2-Wasserstein).
//! * [`fusion`] — the learnable fusion layer combining the three branch
//!   scores per class, with cross-entropy training of its few parameters.
//! * [`episodes`] — N-way M-shot episode sampling, feature banks, and the
//!   seeded synthetic bank generator.
//!
//! Everything is `no_std`-compatible (`alloc` required). All randomness
//! flows through explicitly seeded ChaCha8 generators; derived seeds use the
//! splitmix64 mix in [`episodes::mix_seed`], so episode streams are
//! reproducible bit-for-bit across machines.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
// Index-based loops mirror the subscripts of the formulas they implement.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod descriptors;
pub mod episodes;
mod error;
pub mod fmath;
pub mod fusion;
pub mod metrics;
pub mod tensor;

pub use error::{MmlError, Result};
