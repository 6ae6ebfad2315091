//! Schedule replay against actual durations and method comparison.
//!
//! Only cells that received at least one registration enter the occupancy
//! table, so structurally empty rooms do not count as underbooked.

pub mod compare;
pub mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use compare::{
    method_report, run_method_comparison, Method, MethodInputs, MethodReport, MethodRun,
};
pub use report::{render_json, render_text};

use crate::model::{ProblemInstance, Schedule};
use crate::predict::PredictError;
use crate::solve::{CellKey, SolveError};

pub const UNDER_THRESHOLD_PCT: f64 = 80.0;
pub const OVER_THRESHOLD_PCT: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluateError {
    #[error("missing actual duration for registrations: {}", .0.join(", "))]
    MissingActual(Vec<String>),
    #[error("missing surgical record for registrations: {}", .0.join(", "))]
    MissingRecord(Vec<String>),
    #[error("schedule references registrations not in the instance: {}", .0.join(", "))]
    UnknownRegistration(Vec<String>),
    #[error("schedule uses cells without an MSS slot or shift: {}", .0.join(", "))]
    UnknownCell(Vec<String>),
    #[error("method {0} needs a duration source that was not provided")]
    MissingSource(Method),
    #[error("occupancy table is empty")]
    EmptyTable,
    #[error("no methods requested")]
    NoMethods,
    #[error("{method}: {source}")]
    Solve {
        method: Method,
        #[source]
        source: SolveError,
    },
    #[error(transparent)]
    Predict(#[from] PredictError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOccupancy {
    pub cell: CellKey,
    /// Sum of the durations the schedule was built with.
    pub planned_min: u64,
    pub actual_min: u64,
    pub capacity_min: u32,
    pub occupancy_pct: f64,
}

/// Used cells in `(day, or_id, shift_id)` order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTable {
    pub cells: Vec<CellOccupancy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-cell planned and actual load of `schedule`.
pub fn replay(schedule: &Schedule, instance: &ProblemInstance) -> Result<OccupancyTable, EvaluateError> {
    let mut acc: BTreeMap<(u32, &str, &str), (u64, u64)> = BTreeMap::new();
    let (mut missing, mut unknown, mut bad_cell) = (Vec::new(), Vec::new(), Vec::new());
    for a in &schedule.assignments {
        let Some(r) = instance.registration(&a.registration_id) else {
            unknown.push(a.registration_id.clone());
            continue;
        };
        let Some(actual) = r.actual_duration_min else {
            missing.push(r.id.clone());
            continue;
        };
        let e = acc
            .entry((a.day, a.or_id.as_str(), a.shift_id.as_str()))
            .or_default();
        e.0 += u64::from(r.duration_min);
        e.1 += u64::from(actual);
    }
    if !unknown.is_empty() {
        return Err(EvaluateError::UnknownRegistration(unknown));
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(EvaluateError::MissingActual(missing));
    }
    let mut cells = Vec::with_capacity(acc.len());
    for ((day, or_id, shift_id), (planned, actual)) in acc {
        let in_mss = instance
            .mss
            .iter()
            .any(|s| s.day == day && s.or_id == or_id && s.shift_id == shift_id);
        match instance.shift_capacity(shift_id).filter(|&c| c > 0 && in_mss) {
            Some(capacity) => cells.push(CellOccupancy {
                cell: CellKey {
                    day,
                    or_id: or_id.to_string(),
                    shift_id: shift_id.to_string(),
                },
                planned_min: planned,
                actual_min: actual,
                capacity_min: capacity,
                occupancy_pct: 100.0 * actual as f64 / f64::from(capacity),
            }),
            None => bad_cell.push(format!("{or_id}/day {day}/{shift_id}")),
        }
    }
    if !bad_cell.is_empty() {
        return Err(EvaluateError::UnknownCell(bad_cell));
    }
    Ok(OccupancyTable { cells })
}

/// `(underbooked, overbooked)`: cells strictly below `under_pct` and strictly
/// above `over_pct`.
pub fn booking_counts(table: &OccupancyTable, under_pct: f64, over_pct: f64) -> (usize, usize) {
    let under = table.cells.iter().filter(|c| c.occupancy_pct < under_pct).count();
    let over = table.cells.iter().filter(|c| c.occupancy_pct > over_pct).count();
    (under, over)
}

pub fn occupancy_stats(table: &OccupancyTable) -> Result<OccupancyStats, EvaluateError> {
    if table.cells.is_empty() {
        return Err(EvaluateError::EmptyTable);
    }
    let v: Vec<f64> = table.cells.iter().map(|c| c.occupancy_pct).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(OccupancyStats {
        mean,
        std: var.sqrt(),
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
