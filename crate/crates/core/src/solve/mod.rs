//! Weekly schedule computation.
//!
//! A schedule assigns registrations to MSS cells subject to the hard
//! constraints (each registration at most once, cell capacity, every
//! priority-1 registration placed, matching specialty, at most one patient in
//! the emergency room over the horizon) and is ranked by the lexicographic
//! objective `[L6..L1]`: unassigned registrations per priority, then the
//! largest per-cell confidence sum, then the spread between the largest and
//! smallest sums.

pub mod check;
pub mod exact;
pub mod heuristic;
pub mod io;
pub mod problem;
pub mod random;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use check::{compare_lex, is_feasible, objective_vector, ScheduleViolation};
pub use io::{read_schedule, write_schedule, ObjectiveReport};
pub use problem::{CellKey, ObjectiveMode, Problem, UNASSIGNED};
pub use random::{random_instance, RandomInstanceConfig};

use crate::model::{validate_instance, ProblemInstance, Schedule, ValidationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    pub time_budget_s: f64,
    pub node_limit: Option<u64>,
    /// Worker threads for heuristic restarts; 0 uses every core.
    pub threads: usize,
    pub seed: u64,
    /// Upper bound on heuristic restarts. Runs that stop here rather than on
    /// the time budget are reproducible for a fixed seed.
    pub max_restarts: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            time_budget_s: 60.0,
            node_limit: None,
            threads: 0,
            seed: 0,
            max_restarts: 64,
        }
    }
}

impl SolveLimits {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.time_budget_s.is_finite() && self.time_budget_s > 0.0 {
            Ok(())
        } else {
            Err(SolveError::InvalidLimits(format!(
                "time budget must be positive, got {}",
                self.time_budget_s
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub schedule: Schedule,
    pub proven_optimal: bool,
    pub wall_time_s: f64,
    pub nodes: u64,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("no schedule places every priority-1 registration ({})", .p1_ids.join(", "))]
    Infeasible { p1_ids: Vec<String> },
    #[error("search stopped by its limits before proving optimality after {nodes} nodes")]
    Incomplete {
        incumbent: Option<Box<SolveOutcome>>,
        nodes: u64,
    },
    #[error("invalid instance:\n{0}")]
    InvalidInstance(ValidationReport),
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Exact search on small instances, the heuristic otherwise.
    #[default]
    Auto,
    Exact,
    Heuristic,
}

pub const AUTO_EXACT_MAX_REGISTRATIONS: usize = 15;
pub const AUTO_EXACT_MAX_CELLS: usize = 12;

fn prepare(
    instance: &ProblemInstance,
    mode: ObjectiveMode,
    limits: &SolveLimits,
) -> Result<Problem, SolveError> {
    limits.validate()?;
    let report = validate_instance(instance);
    if !report.is_empty() {
        return Err(SolveError::InvalidInstance(report));
    }
    let p = Problem::new(instance, mode);
    let stuck: Vec<String> = (0..p.n_regs())
        .filter(|&r| p.priority[r] == 1 && p.compatible[r].is_empty())
        .map(|r| p.ids[r].clone())
        .collect();
    if !stuck.is_empty() {
        return Err(SolveError::Infeasible { p1_ids: stuck });
    }
    Ok(p)
}

fn outcome(
    p: &Problem,
    instance: &ProblemInstance,
    choice: &[usize],
    proven_optimal: bool,
    started: Instant,
    nodes: u64,
    restarts: usize,
) -> SolveOutcome {
    let mut schedule = p.to_schedule(choice, Default::default());
    schedule.objective = objective_vector(&schedule, instance);
    SolveOutcome {
        schedule,
        proven_optimal,
        wall_time_s: started.elapsed().as_secs_f64(),
        nodes,
        restarts,
    }
}

/// Optimal schedule by branch-and-bound. Among optimal schedules the one
/// whose per-registration choices (in id order, "unassigned" last) are
/// smallest is returned, so the result does not depend on input order.
pub fn solve_exact(
    instance: &ProblemInstance,
    mode: ObjectiveMode,
    limits: &SolveLimits,
) -> Result<SolveOutcome, SolveError> {
    let started = Instant::now();
    let p = prepare(instance, mode, limits)?;
    let seed = heuristic::quick_incumbent(&p);
    let res = exact::branch_and_bound(&p, limits, seed);
    match (res.best, res.complete) {
        (Some((choice, _)), true) => Ok(outcome(&p, instance, &choice, true, started, res.nodes, 0)),
        (None, true) => Err(SolveError::Infeasible { p1_ids: p.p1_ids() }),
        (best, false) => Err(SolveError::Incomplete {
            incumbent: best.map(|(choice, _)| {
                Box::new(outcome(&p, instance, &choice, false, started, res.nodes, 0))
            }),
            nodes: res.nodes,
        }),
    }
}

/// Anytime schedule: greedy construction, local search, seeded restarts.
/// `proven_optimal` is set when the result meets the root lower bound.
pub fn solve_heuristic(
    instance: &ProblemInstance,
    mode: ObjectiveMode,
    limits: &SolveLimits,
) -> Result<SolveOutcome, SolveError> {
    let started = Instant::now();
    let p = prepare(instance, mode, limits)?;
    match heuristic::run_heuristic(&p, limits) {
        Some(h) => Ok(outcome(
            &p,
            instance,
            &h.choice,
            h.proven_optimal,
            started,
            0,
            h.restarts,
        )),
        None => Err(SolveError::Infeasible { p1_ids: p.p1_ids() }),
    }
}

/// Dispatches on `solver`. With [`SolverChoice::Auto`], small instances go
/// to the exact search and an interrupted search falls back to its best
/// schedule or, failing that, to the heuristic.
pub fn solve(
    instance: &ProblemInstance,
    mode: ObjectiveMode,
    solver: SolverChoice,
    limits: &SolveLimits,
) -> Result<SolveOutcome, SolveError> {
    match solver {
        SolverChoice::Exact => solve_exact(instance, mode, limits),
        SolverChoice::Heuristic => solve_heuristic(instance, mode, limits),
        SolverChoice::Auto => {
            if instance.registrations.len() <= AUTO_EXACT_MAX_REGISTRATIONS
                && instance.mss.len() <= AUTO_EXACT_MAX_CELLS
            {
                match solve_exact(instance, mode, limits) {
                    Err(SolveError::Incomplete {
                        incumbent: Some(best),
                        ..
                    }) => Ok(*best),
                    Err(SolveError::Incomplete { incumbent: None, .. }) => {
                        solve_heuristic(instance, mode, limits)
                    }
                    other => other,
                }
            } else {
                solve_heuristic(instance, mode, limits)
            }
        }
    }
}
