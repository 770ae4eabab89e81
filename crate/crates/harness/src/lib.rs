//! Phase-transition experiments for equilibrium recovery: seeded sweeps over
//! `(n, k, c, trial)`, CSV output and exact theory annotation.

pub mod annotate;
pub mod config;
pub mod error;
pub mod seed;
pub mod sweep;
pub mod trial;

pub use annotate::{
    annotate_record, annotate_theory, write_annotated, AnnotatedRecord, TheoryAnnotation,
};
pub use config::{sample_count, ExperimentConfig, NoiseKind, NoiseSpec};
pub use error::{HarnessError, Result};
pub use seed::{mix64, trial_seed};
pub use sweep::{
    aggregate, read_trials, run_sweep, write_aggregate, write_sweep, write_trials, AggregateRow,
    SweepResult,
};
pub use trial::{draw_game, run_trial, DrawnGame, TrialRecord};
