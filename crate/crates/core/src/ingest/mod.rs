//! Loading, cleaning, and generating surgical data and planning instances.

pub mod clean;
pub mod instance;
pub mod records;
pub mod synth;

pub use clean::{
    check_duration_columns, derive_duration, encode_for_correlation, group_rare_diagnoses, iqr_fences, iqr_filter,
    kmeans, preprocess, prune_correlated_features, CleanDataset, NumericTable, PreprocessConfig,
    Provenance, StageLog, RARE_PREFIX,
};
pub use instance::{
    assemble_instance, build_instance, read_mss, read_registrations, read_shifts, write_mss,
    write_registrations, write_shifts, InstanceConfig,
};
pub use records::{
    read_records, write_records, Column, ColumnKind, RecordTable, SurgicalRecord, TimestampFormat,
};
pub use synth::{
    generate_synthetic_dataset, HospitalShape, SynthConfig, SyntheticWeek, SyntheticWorld,
    WeekConfig,
};

use crate::model::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{0}: empty input")]
    EmptyInput(&'static str),
    #[error("cannot form {k} clusters from {n} points")]
    InvalidClusterCount { k: usize, n: usize },
    #[error("points have different dimensions")]
    RaggedPoints,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("missing required columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("no rows survived preprocessing")]
    EmptyDataset(Provenance),
    #[error("registration {0}: confidence level {1} outside 1..=4")]
    InvalidConfidence(String, u8),
    #[error("invalid instance:\n{0}")]
    InvalidInstance(ValidationReport),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
