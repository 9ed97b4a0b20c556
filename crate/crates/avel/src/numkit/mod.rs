//! Minimal deterministic numeric kernel.
//!
//! Dense row-major matrices, numerically stable softmax and pooling
//! primitives, a clamped binary cross-entropy, a bias-corrected
//! adaptive-moment optimizer, a counter-based seeded RNG, and a
//! finite-difference gradient checker. Everything is `f64` and every
//! operation is a pure function of its inputs, so results are bitwise
//! reproducible across runs.

mod gradcheck;
mod matrix;
mod ops;
mod optim;
mod rng;

pub use gradcheck::{grad_check, GradCheckReport};
pub use matrix::DenseMatrix;
pub use ops::{
    bce_probs, bce_probs_grad, maxpool_cols, maxpool_cols_range, relu_inplace, softmax,
    softmax_grad, BCE_CLAMP,
};
pub use optim::{adam_step, OptimizerState};
pub use rng::{derive_seed, Rng};
