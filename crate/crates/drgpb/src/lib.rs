//! Std companion to `drgpb-core`: JSON configuration, trajectory and trace
//! file formats, the linear-programming cross-check oracle, the Monte Carlo
//! experiment harness and the `drgpb` command-line tool.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod oracle;

pub use config::{Config, ExperimentSettings, WindowSpec};
pub use error::{Error, Result};
pub use experiment::{
    compare_radii, run_experiment, BatchResults, ExperimentSpec, RunMetrics, Summary, Window,
};
pub use oracle::{brute_force_oracle, crosscheck, CrosscheckReport, OracleSolution};
