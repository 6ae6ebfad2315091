//! Operating-room scheduling toolkit.
//!
//! The crate is organised as a pipeline:
//!
//! * [`ingest`] parses historical surgical records, derives and cleans the
//!   duration target, and assembles scheduling instances from CSV files.
//! * [`predict`] encodes features and trains duration regressors (trees,
//!   forests, boosted trees, nearest neighbours), with cross-validated grid
//!   search and APE-based confidence levels.
//! * [`solve`] computes weekly schedules that respect the hard constraints and
//!   lexicographically minimise unassigned registrations by priority, then the
//!   confidence load of the busiest cell, then the confidence spread.
//! * [`evaluate`] replays schedules against actual durations and builds the
//!   occupancy / overbooking comparison report.
//!
//! Data-parallel loops (forest fitting, grid search, heuristic restarts) run on
//! rayon when the `parallel` feature is enabled and sequentially otherwise; the
//! results are identical either way.

pub mod evaluate;
pub mod ingest;
pub mod model;
pub mod par;
pub mod predict;
pub mod solve;

pub use model::{
    Assignment, ConfidenceLevel, MssSlot, ObjectiveVector, ProblemInstance, Registration,
    Schedule, Shift, ValidationReport, Violation,
};
