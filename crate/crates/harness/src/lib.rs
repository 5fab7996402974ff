//! Experiment runner for view-planning reconstruction scenarios: tabletop
//! scene synthesis, the five view scenarios, the registration-noise
//! ablation, and CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud_io;
pub mod config;
pub mod scene;
pub mod suite;
pub mod trial;

pub use config::{CompleterChoice, ConfigError, Scenario, SecondViewMode, SuiteConfig};
pub use suite::{run_suite, run_trials, SuiteError};
pub use trial::{run_pair, run_trial, MeshEntry, TrialFailure, TrialResult};
