//! Low-rank orthogonalization and the matrix-signed optimizers built on it.
//!
//! * [`linalg`]: dense kernels (thin QR, SVD, matrix sign, Newton–Schulz).
//! * [`orthogonalize`]: sketch-based `Q msgn(Q^T M)` and the rank safeguard.
//! * [`optimizers`]: fixed-rank and safeguarded signed GD, low-rank Muon, and
//!   the Muon / SGDM / AdamW baselines.
//! * [`problems`]: matrix regression, near-low-rank test matrices and noise
//!   models.
//! * [`experiments`]: the `bench` harness (timing, robustness, regression,
//!   invariants).

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod optimizers;
pub mod orthogonalize;
pub mod problems;

pub use error::{Error, Result};
pub use linalg::{Matrix, PolarConfig, PolarMethod};
pub use orthogonalize::{LowRankSign, ResidualMode, SafeguardPolicy, SketchMethod, SketchSpec};

use rand::SeedableRng;

/// The generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
