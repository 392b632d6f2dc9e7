//! Experiment orchestration: configuration, the end-to-end pipeline, sweeps,
//! ablations, the epsilon-scaling fit and CSV/JSON reporting.
//!
//! Every run is a pure function of `(config, method, epsilon, seed)`. Random
//! streams are derived from the seed with [`crate::rng::derive_seed`] and
//! tagged by budget, stage and client, so the client phase is shared by all
//! methods and adding a method never perturbs existing streams.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod scaling;
pub mod sweep;

pub use config::{DataSource, ExperimentConfig, Method, OutputConfig, Overrides, Preset};
pub use pipeline::{Experiment, GfcOutput, RunParams, RunResult, StageTimings};
pub use scaling::{epsilon_scaling_report, ScalingReport, ScalingRow};
pub use sweep::{ablate, sweep, AblationParam, AggregateRow, Summary, SweepOutput};
