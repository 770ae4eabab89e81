//! Recovery of the pure-strategy Nash equilibria of sparse linear influence
//! games from noisy joint-action samples.
//!
//! * [`game`]: games, payoffs, exact equilibrium enumeration, random sparse games.
//! * [`noise`]: global and local observation models with exact pmfs and samplers.
//! * [`estimator`]: per-player l1-regularized logistic regression.
//! * [`theory`]: exact constants, the regularization window and sample
//!   requirement, and the Fano ensemble used for lower bounds.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below fix the scalar type.

// `!(x > 0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod estimator;
pub mod game;
pub mod linalg;
pub mod noise;
pub mod scalar;
pub mod theory;

pub use data::{ActionCounts, Dataset};
pub use error::{Error, Result};
pub use estimator::{
    fit_game, fit_game_actions, fit_player, gradient, hessian, kkt_residual, lambda_schedule, loss,
    DesignMatrix, FitResult, GameFit, LambdaPolicy, SolverConfig,
};
pub use game::{
    enumerate_psne, feature_vector, games_equivalent, generate_game, min_payoff_over_psne, payoff,
    FeatureVector, Game, JointAction, PsneSet, MAX_ENUM_PLAYERS,
};
pub use linalg::Matrix;
pub use noise::{
    global_constants, scan_constants, DistributionConstants, GlobalNoiseModel, JointDistribution,
    LocalNoiseModel, NoiseModel,
};
pub use scalar::Scalar;
pub use theory::{
    build_fano_ensemble, compute_constants, compute_game_constants, fano_kl, fano_sample_bound,
    recovery_window, FanoEnsemble, RecoveryWindow, TheoryConstants,
};

pub type Game64 = Game<f64>;
pub type Game32 = Game<f32>;
pub type GlobalNoiseModel64 = GlobalNoiseModel<f64>;
pub type LocalNoiseModel64 = LocalNoiseModel<f64>;
pub type NoiseModel64 = NoiseModel<f64>;
pub type DesignMatrix64 = DesignMatrix<f64>;
pub type DesignMatrix32 = DesignMatrix<f32>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type FitResult64 = FitResult<f64>;
pub type TheoryConstants64 = TheoryConstants<f64>;
pub type FanoEnsemble64 = FanoEnsemble<f64>;
pub type Matrix64 = Matrix<f64>;
