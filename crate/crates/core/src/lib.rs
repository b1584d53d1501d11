//! Distributionally robust state and mode estimation for Markov jump linear
//! systems.
//!
//! A bank of mode-matched Kalman filters is run at every step. The nominal
//! posterior over modes is updated with Bayes' rule, and the bank is merged
//! with the *worst-case* posterior inside a total-variation ball around the
//! nominal one. The worst case has a closed form (a water-filling rule over
//! the per-mode losses), so each step costs little more than the classical
//! first-order GPB filter, which is recovered at radius zero.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the experiment
//! harness and the command-line front end live in the `drgpb` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod filter;
pub mod kalman;
pub mod linalg;
pub mod mode;
pub mod model;
pub mod robust;

pub use error::{Error, Result};
pub use filter::{
    compute_mode_losses, drgpb_step, init_filter, merge_estimates, run_filter, FilterConfig,
    FilterState, RadiusSchedule,
};
pub use kalman::{
    gaussian_logpdf, kf_step, CovarianceUpdate, GaussianBelief, KalmanOptions, ModeStepOutput,
};
pub use mode::{predict_mode_prior, update_mode_posterior, ModeDistribution};
pub use model::{
    sample_trajectory, seeded_rng, validate_model, InitialModeConvention, MjlsModel, ModeMatrices,
    ModelSchedule, ModelView, PiSchedule, Trajectory, ValidationReport, Violation,
};
pub use robust::{
    nominal_value, partition_levels, robust_value_equivalent, tvd_distance, waterfill,
    EquivalentValue, Level, LevelPartition, ValueCase, WaterfillResult,
};

/// Dense dynamic matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense dynamic column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
