//! Schedule-level hard-constraint checks and objective evaluation.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ObjectiveVector, ProblemInstance, Schedule};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleViolation {
    UnknownRegistration { id: String },
    DuplicateAssignment { id: String },
    UnknownCell { id: String, or_id: String, day: u32, shift_id: String },
    CapacityExceeded { or_id: String, day: u32, shift_id: String, load: u64, capacity: u32 },
    UnassignedPriorityOne { id: String },
    SpecialtyMismatch { id: String, registration: String, cell: String },
    EmergencyRoomOverused { or_id: String, count: usize },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownRegistration { id } => write!(f, "assignment of unknown registration {id}"),
            Self::DuplicateAssignment { id } => write!(f, "registration {id} assigned more than once"),
            Self::UnknownCell { id, or_id, day, shift_id } => {
                write!(f, "registration {id} assigned to {or_id}/day {day}/{shift_id}, which has no MSS slot")
            }
            Self::CapacityExceeded { or_id, day, shift_id, load, capacity } => {
                write!(f, "{or_id}/day {day}/{shift_id}: {load} min booked, capacity {capacity}")
            }
            Self::UnassignedPriorityOne { id } => write!(f, "priority-1 registration {id} is unassigned"),
            Self::SpecialtyMismatch { id, registration, cell } => {
                write!(f, "registration {id} ({registration}) placed in a {cell} slot")
            }
            Self::EmergencyRoomOverused { or_id, count } => {
                write!(f, "emergency room {or_id} hosts {count} patients")
            }
        }
    }
}

type Cell<'a> = (u32, &'a str, &'a str);

/// All hard-constraint violations of `schedule`; empty iff it is feasible.
pub fn is_feasible(schedule: &Schedule, instance: &ProblemInstance) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    let regs: HashMap<&str, _> = instance
        .registrations
        .iter()
        .map(|r| (r.id.as_str(), r))
        .collect();
    let slots: HashMap<Cell, &str> = instance
        .mss
        .iter()
        .map(|s| ((s.day, s.or_id.as_str(), s.shift_id.as_str()), s.specialty.as_str()))
        .collect();
    let mut seen = HashSet::new();
    let mut load: BTreeMap<Cell, u64> = BTreeMap::new();
    let mut emergency = 0;
    for a in &schedule.assignments {
        let Some(reg) = regs.get(a.registration_id.as_str()) else {
            out.push(ScheduleViolation::UnknownRegistration { id: a.registration_id.clone() });
            continue;
        };
        if !seen.insert(a.registration_id.as_str()) {
            out.push(ScheduleViolation::DuplicateAssignment { id: a.registration_id.clone() });
        }
        let key = (a.day, a.or_id.as_str(), a.shift_id.as_str());
        let Some(&specialty) = slots.get(&key) else {
            out.push(ScheduleViolation::UnknownCell {
                id: a.registration_id.clone(),
                or_id: a.or_id.clone(),
                day: a.day,
                shift_id: a.shift_id.clone(),
            });
            continue;
        };
        if specialty != reg.specialty {
            out.push(ScheduleViolation::SpecialtyMismatch {
                id: reg.id.clone(),
                registration: reg.specialty.clone(),
                cell: specialty.to_string(),
            });
        }
        *load.entry(key).or_default() += u64::from(reg.duration_min);
        if instance.emergency_or_id.as_deref() == Some(a.or_id.as_str()) {
            emergency += 1;
        }
    }
    for ((day, or_id, shift_id), l) in load {
        let capacity = instance.shift_capacity(shift_id).unwrap_or(0);
        if l > u64::from(capacity) {
            out.push(ScheduleViolation::CapacityExceeded {
                or_id: or_id.to_string(),
                day,
                shift_id: shift_id.to_string(),
                load: l,
                capacity,
            });
        }
    }
    for r in &instance.registrations {
        if r.priority == 1 && !seen.contains(r.id.as_str()) {
            out.push(ScheduleViolation::UnassignedPriorityOne { id: r.id.clone() });
        }
    }
    if emergency > 1 {
        out.push(ScheduleViolation::EmergencyRoomOverused {
            or_id: instance.emergency_or_id.clone().unwrap_or_default(),
            count: emergency,
        });
    }
    out
}

/// Objective of a schedule. Every MSS cell takes part in the confidence
/// maximum and minimum, empty cells with sum 0; registrations without a
/// confidence level add nothing.
pub fn objective_vector(schedule: &Schedule, instance: &ProblemInstance) -> ObjectiveVector {
    let mut sums: HashMap<Cell, u64> = instance
        .mss
        .iter()
        .map(|s| ((s.day, s.or_id.as_str(), s.shift_id.as_str()), 0))
        .collect();
    let mut assigned = HashSet::new();
    for a in &schedule.assignments {
        assigned.insert(a.registration_id.as_str());
        let conf = instance
            .registration(&a.registration_id)
            .and_then(|r| r.confidence)
            .map_or(0, |c| u64::from(c.level()));
        if let Some(s) = sums.get_mut(&(a.day, a.or_id.as_str(), a.shift_id.as_str())) {
            *s += conf;
        }
    }
    let mut levels = [0u64; 6];
    for r in &instance.registrations {
        if !assigned.contains(r.id.as_str()) && (1..=4).contains(&r.priority) {
            levels[(r.priority - 1) as usize] += 1;
        }
    }
    let max = sums.values().copied().max().unwrap_or(0);
    let min = sums.values().copied().min().unwrap_or(0);
    levels[4] = max;
    levels[5] = max - min;
    ObjectiveVector::from_levels(levels)
}

/// Lexicographic comparison of `[L6, L5, L4, L3, L2, L1]`; smaller is better.
pub fn compare_lex(a: &ObjectiveVector, b: &ObjectiveVector) -> Ordering {
    a.levels().cmp(&b.levels())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Assignment, ConfidenceLevel, MssSlot, Registration, Shift};

    fn reg(id: &str, p: u8, d: u32, c: Option<u8>) -> Registration {
        Registration {
            id: id.into(),
            priority: p,
            specialty: "A".into(),
            duration_min: d,
            actual_duration_min: None,
            confidence: c.and_then(ConfidenceLevel::new),
        }
    }

    fn inst(regs: Vec<Registration>) -> ProblemInstance {
        ProblemInstance {
            registrations: regs,
            mss: vec![
                MssSlot { or_id: "OR1".into(), specialty: "A".into(), shift_id: "S1".into(), day: 0 },
                MssSlot { or_id: "OR2".into(), specialty: "A".into(), shift_id: "S1".into(), day: 0 },
            ],
            shifts: vec![Shift { shift_id: "S1".into(), capacity_min: 10 }],
            emergency_or_id: Some("OR2".into()),
            planning_days: 1,
        }
    }

    fn at(id: &str, or: &str) -> Assignment {
        Assignment {
            registration_id: id.into(),
            priority: 2,
            or_id: or.into(),
            day: 0,
            shift_id: "S1".into(),
        }
    }

    fn sched(a: Vec<Assignment>) -> Schedule {
        Schedule { assignments: a, objective: ObjectiveVector::default() }
    }

    #[test]
    fn capacity_fixtures() {
        let i = inst(vec![reg("a", 2, 4, None), reg("b", 2, 4, None)]);
        assert!(is_feasible(&sched(vec![at("a", "OR1"), at("b", "OR1")]), &i).is_empty());
        let i = inst(vec![reg("a", 2, 6, None), reg("b", 2, 6, None)]);
        let v = is_feasible(&sched(vec![at("a", "OR1"), at("b", "OR1")]), &i);
        assert!(matches!(v[..], [ScheduleViolation::CapacityExceeded { load: 12, .. }]));
    }

    #[test]
    fn other_violations() {
        let i = inst(vec![reg("a", 1, 2, None), reg("b", 2, 2, None), reg("c", 2, 2, None)]);
        let v = is_feasible(&sched(vec![at("b", "OR2"), at("c", "OR2"), at("b", "OR1"), at("z", "OR1")]), &i);
        assert!(v.contains(&ScheduleViolation::UnassignedPriorityOne { id: "a".into() }));
        assert!(v.contains(&ScheduleViolation::DuplicateAssignment { id: "b".into() }));
        assert!(v.contains(&ScheduleViolation::UnknownRegistration { id: "z".into() }));
        assert!(v.iter().any(|x| matches!(x, ScheduleViolation::EmergencyRoomOverused { count: 2, .. })));
    }

    #[test]
    fn objective_fixtures() {
        let i = inst(vec![reg("a", 2, 1, None), reg("b", 2, 1, None), reg("c", 2, 1, None)]);
        assert_eq!(objective_vector(&sched(vec![]), &i).levels(), [0, 3, 0, 0, 0, 0]);
        let i = inst(vec![reg("a", 2, 1, Some(1)), reg("b", 2, 1, Some(2))]);
        let o = objective_vector(&sched(vec![at("a", "OR1"), at("b", "OR1")]), &i);
        assert_eq!(o.levels(), [0, 0, 0, 0, 3, 3]);
        let o = objective_vector(&sched(vec![at("a", "OR1"), at("b", "OR2")]), &i);
        assert_eq!(o.levels(), [0, 0, 0, 0, 2, 1]);
    }

    #[test]
    fn lexicographic_examples() {
        let v = ObjectiveVector::from_levels;
        assert_eq!(compare_lex(&v([0, 1, 0, 0, 0, 0]), &v([0, 0, 9, 9, 99, 99])), Ordering::Greater);
        assert_eq!(compare_lex(&v([1, 2, 3, 4, 5, 6]), &v([1, 2, 3, 4, 5, 6])), Ordering::Equal);
        assert_eq!(compare_lex(&v([0, 0, 0, 0, 3, 0]), &v([0, 0, 0, 0, 5, 0])), Ordering::Less);
    }
}
