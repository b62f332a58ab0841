//! Benchmark problems, gradient oracles and noise models.

pub mod container;
mod noise;
mod regression;

pub use noise::{
    empirical_sign_covariance, gen_near_lowrank, sample_noise, sample_stoch_grad, NearLowRankSpec,
    NoiseKind, NoiseModel,
};
pub use regression::{gen_matrix_regression, gradient, objective, MatrixRegressionInstance};
