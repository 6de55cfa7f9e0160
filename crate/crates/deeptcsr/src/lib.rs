//! Discrete-time dynamic survival regression with target-network
//! bootstrapped supervision.
//!
//! The crate models right-censored state sequences: a hazard network
//! scores the probability of the event `d` steps ahead of any observed
//! state, and training mixes observed outcomes with soft targets
//! bootstrapped from a slowly moving copy of the network. That copy (the
//! target network) is pulled toward the main network by an exponential
//! moving average with rate `tau`, while `lambda` trades bootstrapped
//! near-term supervision against observed far-term labels. At
//! `lambda = 1` the method collapses to classical landmarking.
//!
//! What lives where:
//!
//! * [`seqdata`] — the data model and JSONL persistence
//! * [`synthgen`] — seeded Gaussian-random-walk churn generators
//! * [`model`] — hazard parameterizations and analytic gradients
//! * [`targets`] — hard landmarking labels and bootstrapped pseudo tables
//! * [`trainer`] — the mini-batch fit loop, optimizers, checkpoints
//! * [`metrics`] — Kaplan-Meier, concordance, Brier/IBS, variability
//! * [`experiments`] — the config-driven command layer behind the CLI
//!
//! The `examples/` directory shows one runnable program per capability;
//! the `dtcsr` binary exposes the same commands on the shell.

pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod seqdata;
pub mod synthgen;
pub mod targets;
pub mod trainer;

pub use error::{Error, Result};
pub use metrics::{
    brier_curve, concordance_index, evaluate_model, ibs, kaplan_meier, variability_delta,
    EvalReport, KmCurve,
};
pub use model::{ema_update, Architecture, HazardModel, ModelDims, ParameterVector};
pub use seqdata::{chunk_sequences, dataset_stats, Dataset, SequenceRecord, StateVector};
pub use synthgen::{calibrate_intercept, default_coefficients, generate_random_walk, RwConfig};
pub use targets::{hard_labels, pseudo_table, pseudo_table_oracle, TableMode, TargetTable};
pub use trainer::{fit, resume, Checkpoint, FitResult, LossMode, OptimizerKind, TrainConfig};
