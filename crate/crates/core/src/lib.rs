//! Eventually-almost-sure sequential prediction: predictor combinators,
//! concrete predictors, seeded models and a Monte Carlo harness.
//!
//! Everything is deterministic given a 64-bit seed; see [`rng`] for the
//! generator's integer definition.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinators;
pub mod error;
pub mod game;
pub mod harness;
pub mod models;
pub mod predictors;
pub mod rng;

pub use error::{Error, Result};
pub use game::{
    losses, play, run_trajectory, LossEvaluator, LossKind, ModelAttributes, Outcome, Prediction, PredictionKind,
    Predictor, PredictorFactory, Trajectory,
};
pub use models::ModelSpec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
