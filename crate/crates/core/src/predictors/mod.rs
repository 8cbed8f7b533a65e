//! Concrete predictors and learners.

pub mod cover;
pub mod entropy;
pub mod functional;
pub mod insurance;
pub mod markov;
pub mod mean_set;
pub mod rationals;
pub mod simple;
pub mod slln;
pub mod threshold;
