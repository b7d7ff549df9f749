//! Experiment runner for the minimax laboratory: figure reproduction, config
//! driven runs, bound tables and paired-dataset stability sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod reproduce;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
