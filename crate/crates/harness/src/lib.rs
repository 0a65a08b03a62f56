//! Experiment driver for the `phasecode` decoder: configuration, trial
//! orchestration, CSV tables and the file formats used to exchange signals,
//! graphs and observations.

pub mod config;
pub mod experiment;
pub mod formats;

pub use config::{ExperimentConfig, InitMode, Mode};
pub use experiment::{run, run_de_figure, run_sweep, run_trial, run_twolayer};
