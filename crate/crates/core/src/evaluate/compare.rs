//! Side-by-side scheduling with different duration sources.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{booking_counts, occupancy_stats, replay, EvaluateError, OccupancyStats};
use super::{OVER_THRESHOLD_PCT, UNDER_THRESHOLD_PCT};
use crate::ingest::SurgicalRecord;
use crate::model::{ConfidenceLevel, ObjectiveVector, ProblemInstance, Schedule};
use crate::par::{self, Threads};
use crate::predict::{ape, confidence_level, MeanEstimator, ModelArtifact};
use crate::solve::{objective_vector, solve, ObjectiveMode, SolveLimits, SolveOutcome, SolverChoice};

/// Where the scheduling durations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Actual durations (an oracle, not available in practice).
    #[serde(rename = "VBA")]
    Vba,
    /// Model predictions, with confidence levels in the objective.
    Conf,
    /// Model predictions only.
    Pred,
    /// Department mean duration.
    Dep,
    /// Procedure-type mean duration.
    Surg,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Vba, Method::Conf, Method::Pred, Method::Dep, Method::Surg];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vba => "VBA",
            Method::Conf => "Conf",
            Method::Pred => "Pred",
            Method::Dep => "Dep",
            Method::Surg => "Surg",
        }
    }

    pub fn objective_mode(self) -> ObjectiveMode {
        match self {
            Method::Conf => ObjectiveMode::WithConfidence,
            _ => ObjectiveMode::PriorityOnly,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown method {s:?} (expected VBA, Conf, Pred, Dep or Surg)"))
    }
}

/// A week to schedule plus every available duration source, aligned with
/// `instance.registrations`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodInputs {
    pub hospital: String,
    /// Registrations must carry actual durations.
    pub instance: ProblemInstance,
    pub predicted: Option<Vec<f64>>,
    pub department_mean: Option<Vec<f64>>,
    pub procedure_mean: Option<Vec<f64>>,
}

fn minutes(x: f64) -> u32 {
    x.round().clamp(1.0, f64::from(u32::MAX)) as u32
}

impl MethodInputs {
    /// Looks up each registration's surgical record by id and evaluates the
    /// given estimators on it.
    pub fn from_records(
        hospital: impl Into<String>,
        instance: ProblemInstance,
        records: &[SurgicalRecord],
        model: Option<&ModelArtifact>,
        department: Option<&MeanEstimator>,
        procedure: Option<&MeanEstimator>,
    ) -> Result<Self, EvaluateError> {
        let by_id: HashMap<&str, &SurgicalRecord> = records.iter().map(|r| (r.id(), r)).collect();
        let mut rows = Vec::with_capacity(instance.registrations.len());
        let mut missing = Vec::new();
        for reg in &instance.registrations {
            match by_id.get(reg.id.as_str()) {
                Some(&r) => rows.push(r.clone()),
                None => missing.push(reg.id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(EvaluateError::MissingRecord(missing));
        }
        let predicted = model.map(|m| m.predict_records(&rows)).transpose()?;
        let mean = |e: &MeanEstimator| rows.iter().map(|r| e.estimate(r)).collect();
        Ok(Self {
            hospital: hospital.into(),
            predicted,
            department_mean: department.map(mean),
            procedure_mean: procedure.map(mean),
            instance,
        })
    }

    /// Confidence of each prediction, from its APE against the actual
    /// duration.
    pub fn confidences(&self) -> Result<Option<Vec<ConfidenceLevel>>, EvaluateError> {
        let Some(pred) = &self.predicted else {
            return Ok(None);
        };
        let actual = self.actuals()?;
        actual
            .iter()
            .zip(pred)
            .map(|(&a, &p)| Ok(confidence_level(ape(f64::from(a), p)?)))
            .collect::<Result<Vec<_>, EvaluateError>>()
            .map(Some)
    }

    fn actuals(&self) -> Result<Vec<u32>, EvaluateError> {
        let missing: Vec<String> = self
            .instance
            .registrations
            .iter()
            .filter(|r| r.actual_duration_min.is_none())
            .map(|r| r.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(EvaluateError::MissingActual(missing));
        }
        Ok(self
            .instance
            .registrations
            .iter()
            .filter_map(|r| r.actual_duration_min)
            .collect())
    }

    /// The instance a method schedules: its durations, and the prediction
    /// confidences (when a model is present) so that every method's
    /// confidence spread can be reported on the same scale.
    pub fn instance_for(&self, method: Method) -> Result<ProblemInstance, EvaluateError> {
        let actual = self.actuals()?;
        let source: Vec<u32> = match method {
            Method::Vba => actual,
            Method::Conf | Method::Pred => need(&self.predicted, method)?,
            Method::Dep => need(&self.department_mean, method)?,
            Method::Surg => need(&self.procedure_mean, method)?,
        };
        let conf = self.confidences()?;
        let mut i = 0;
        Ok(self.instance.with_durations(|_| {
            let out = (source[i], conf.as_ref().map(|c| c[i]));
            i += 1;
            out
        }))
    }
}

fn need(v: &Option<Vec<f64>>, method: Method) -> Result<Vec<u32>, EvaluateError> {
    v.as_ref()
        .map(|v| v.iter().copied().map(minutes).collect())
        .ok_or(EvaluateError::MissingSource(method))
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub hospital: String,
    pub method: Method,
    /// Cells with at least one registration.
    pub cells: usize,
    pub occupancy: OccupancyStats,
    pub overbooked: usize,
    pub underbooked: usize,
    /// Objective of the schedule, with the confidence levels at their
    /// reporting weights even for methods that ignore them while solving.
    pub objective: ObjectiveVector,
    pub proven_optimal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub report: MethodReport,
    pub outcome: SolveOutcome,
}

/// Schedules the week once per method with identical limits, replays every
/// schedule on the actual durations, and reports in canonical method order.
pub fn run_method_comparison(
    inputs: &MethodInputs,
    methods: &[Method],
    solver: SolverChoice,
    limits: &SolveLimits,
) -> Result<Vec<MethodRun>, EvaluateError> {
    let mut methods = methods.to_vec();
    methods.sort_unstable();
    methods.dedup();
    if methods.is_empty() {
        return Err(EvaluateError::NoMethods);
    }
    let runs = par::map_indexed(methods.len(), Threads(limits.threads), |i| {
        run_one(inputs, methods[i], solver, limits)
    });
    runs.into_iter().collect()
}

fn run_one(
    inputs: &MethodInputs,
    method: Method,
    solver: SolverChoice,
    limits: &SolveLimits,
) -> Result<MethodRun, EvaluateError> {
    let instance = inputs.instance_for(method)?;
    let outcome = solve(&instance, method.objective_mode(), solver, limits)
        .map_err(|source| EvaluateError::Solve { method, source })?;
    let report = method_report(&inputs.hospital, method, &outcome.schedule, &instance, outcome.proven_optimal)?;
    Ok(MethodRun { report, outcome })
}

/// Replays a schedule on the actual durations of `instance` and summarises
/// it. The objective is recomputed on `instance`.
pub fn method_report(
    hospital: &str,
    method: Method,
    schedule: &Schedule,
    instance: &ProblemInstance,
    proven_optimal: bool,
) -> Result<MethodReport, EvaluateError> {
    let table = replay(schedule, instance)?;
    let (underbooked, overbooked) = booking_counts(&table, UNDER_THRESHOLD_PCT, OVER_THRESHOLD_PCT);
    Ok(MethodReport {
        hospital: hospital.to_string(),
        method,
        cells: table.cells.len(),
        occupancy: occupancy_stats(&table)?,
        overbooked,
        underbooked,
        objective: objective_vector(schedule, instance),
        proven_optimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MssSlot, Registration, Shift};

    fn inputs() -> MethodInputs {
        let regs = [(60, 70.0), (90, 80.0), (120, 150.0), (45, 44.0)]
            .iter()
            .enumerate()
            .map(|(i, &(actual, _))| Registration {
                id: format!("r{i}"),
                priority: if i == 0 { 1 } else { 2 },
                specialty: "A".into(),
                duration_min: actual,
                actual_duration_min: Some(actual),
                confidence: None,
            })
            .collect();
        MethodInputs {
            hospital: "Test".into(),
            instance: ProblemInstance {
                registrations: regs,
                mss: (0..2)
                    .map(|day| MssSlot { or_id: "OR1".into(), specialty: "A".into(), shift_id: "S1".into(), day })
                    .collect(),
                shifts: vec![Shift { shift_id: "S1".into(), capacity_min: 180 }],
                emergency_or_id: None,
                planning_days: 2,
            },
            predicted: Some(vec![70.0, 80.0, 150.0, 44.0]),
            department_mean: Some(vec![80.0; 4]),
            procedure_mean: None,
        }
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().to_lowercase().parse::<Method>(), Ok(m));
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("xgb".parse::<Method>().is_err());
    }

    #[test]
    fn method_instances() {
        let inp = inputs();
        let conf = inp.confidences().unwrap().unwrap();
        let levels: Vec<u8> = conf.iter().map(|c| c.level()).collect();
        assert_eq!(levels, vec![2, 2, 3, 1]);
        let pred = inp.instance_for(Method::Pred).unwrap();
        assert_eq!(pred.registrations[2].duration_min, 150);
        assert_eq!(pred.registrations[2].actual_duration_min, Some(120));
        assert_eq!(inp.instance_for(Method::Dep).unwrap().registrations[0].duration_min, 80);
        assert_eq!(inp.instance_for(Method::Surg), Err(EvaluateError::MissingSource(Method::Surg)));
    }

    #[test]
    fn comparison_rows_and_vba_never_overbooks() {
        let runs = run_method_comparison(
            &inputs(),
            &[Method::Pred, Method::Vba, Method::Conf, Method::Vba],
            SolverChoice::Exact,
            &SolveLimits::default(),
        )
        .unwrap();
        let order: Vec<Method> = runs.iter().map(|r| r.report.method).collect();
        assert_eq!(order, vec![Method::Vba, Method::Conf, Method::Pred]);
        assert_eq!(runs[0].report.overbooked, 0);
        assert!(runs[0].report.occupancy.max <= 100.0);
        assert_eq!(
            run_method_comparison(&inputs(), &[], SolverChoice::Exact, &SolveLimits::default()),
            Err(EvaluateError::NoMethods)
        );
    }
}
