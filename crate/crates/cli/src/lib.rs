//! Command-line driver for the e.a.s. prediction laboratory.

pub mod catalog;
pub mod config;
pub mod experiment;
