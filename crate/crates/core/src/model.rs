//! Domain types shared by every stage of the pipeline.
//!
//! All types are plain immutable values once constructed and can be shared
//! read-only across worker threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Confidence attached to a duration prediction, derived from its APE.
///
/// `1` is High, `2` Moderate, `3` Low and `4` Very Low. The numeric value is
/// also the weight the level contributes to a cell's confidence sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ConfidenceLevel(u8);

impl ConfidenceLevel {
    pub const HIGH: Self = Self(1);
    pub const MODERATE: Self = Self(2);
    pub const LOW: Self = Self(3);
    pub const VERY_LOW: Self = Self(4);

    pub fn new(level: u8) -> Option<Self> {
        (1..=4).contains(&level).then_some(Self(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn label(self) -> &'static str {
        match self.0 {
            1 => "High",
            2 => "Moderate",
            3 => "Low",
            _ => "Very Low",
        }
    }
}

impl TryFrom<u8> for ConfidenceLevel {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| format!("confidence level {value} outside 1..=4"))
    }
}

impl From<ConfidenceLevel> for u8 {
    fn from(c: ConfidenceLevel) -> u8 {
        c.0
    }
}

impl fmt::Display for ConfidenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A waiting-list entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub id: String,
    /// 1 (mandatory) to 4 (lowest).
    pub priority: u8,
    pub specialty: String,
    /// Duration used for scheduling; its source depends on the method.
    pub duration_min: u32,
    pub actual_duration_min: Option<u32>,
    pub confidence: Option<ConfidenceLevel>,
}

/// One master-surgical-schedule entry: `specialty` owns `or_id` during
/// `shift_id` on `day`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MssSlot {
    pub or_id: String,
    pub specialty: String,
    pub shift_id: String,
    pub day: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shift {
    pub shift_id: String,
    pub capacity_min: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub registrations: Vec<Registration>,
    pub mss: Vec<MssSlot>,
    pub shifts: Vec<Shift>,
    /// Room reserved for emergencies; it may host at most one patient over
    /// the whole horizon.
    pub emergency_or_id: Option<String>,
    pub planning_days: u32,
}

impl ProblemInstance {
    pub fn shift_capacity(&self, shift_id: &str) -> Option<u32> {
        self.shifts
            .iter()
            .find(|s| s.shift_id == shift_id)
            .map(|s| s.capacity_min)
    }

    pub fn registration(&self, id: &str) -> Option<&Registration> {
        self.registrations.iter().find(|r| r.id == id)
    }

    /// Copy of the instance with every registration's scheduling duration
    /// and confidence replaced.
    pub fn with_durations<F>(&self, mut f: F) -> ProblemInstance
    where
        F: FnMut(&Registration) -> (u32, Option<ConfidenceLevel>),
    {
        let mut out = self.clone();
        for r in &mut out.registrations {
            let (d, c) = f(r);
            r.duration_min = d;
            r.confidence = c;
        }
        out
    }
}

/// `x(ID, P, OR, DAY, SHIFT)`: registration placed in one MSS cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub registration_id: String,
    pub priority: u8,
    pub or_id: String,
    pub day: u32,
    pub shift_id: String,
}

/// Weak-constraint costs ordered from the most to the least important level.
///
/// The derived `Ord` compares fields in declaration order, which is exactly
/// the lexicographic order used by the solvers.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ObjectiveVector {
    /// Unassigned priority-1 registrations (0 whenever the schedule is feasible).
    pub l6: u64,
    /// Unassigned priority-2 registrations.
    pub l5: u64,
    /// Unassigned priority-3 registrations.
    pub l4: u64,
    /// Unassigned priority-4 registrations.
    pub l3: u64,
    /// Largest per-cell sum of confidence levels.
    pub l2: u64,
    /// Largest minus smallest per-cell confidence sum.
    pub l1: u64,
}

impl ObjectiveVector {
    pub fn from_levels(levels: [u64; 6]) -> Self {
        let [l6, l5, l4, l3, l2, l1] = levels;
        Self { l6, l5, l4, l3, l2, l1 }
    }

    pub fn levels(&self) -> [u64; 6] {
        [self.l6, self.l5, self.l4, self.l3, self.l2, self.l1]
    }

    /// Unassigned count for priority `p` (1..=4).
    pub fn unassigned(&self, p: u8) -> u64 {
        self.levels()[(p as usize).saturating_sub(1).min(3)]
    }
}

impl fmt::Display for ObjectiveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{},{},{},{},{},{}]",
            self.l6, self.l5, self.l4, self.l3, self.l2, self.l1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub assignments: Vec<Assignment>,
    pub objective: ObjectiveVector,
}

impl Schedule {
    pub fn empty() -> Self {
        Self {
            assignments: Vec::new(),
            objective: ObjectiveVector::default(),
        }
    }

    /// Assignments sorted by `(registration id, day, or_id, shift_id)`.
    pub fn sorted_assignments(&self) -> Vec<Assignment> {
        let mut v = self.assignments.clone();
        v.sort_by(|a, b| {
            (&a.registration_id, a.day, &a.or_id, &a.shift_id)
                .cmp(&(&b.registration_id, b.day, &b.or_id, &b.shift_id))
        });
        v
    }
}

/// A structural problem found by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DanglingShift { or_id: String, day: u32, shift_id: String },
    DuplicateMssSlot { or_id: String, day: u32, shift_id: String },
    DayOutOfRange { or_id: String, day: u32, planning_days: u32 },
    NonPositiveDuration { registration_id: String },
    NonPositiveActualDuration { registration_id: String },
    InvalidPriority { registration_id: String, priority: u8 },
    DuplicateRegistration { registration_id: String },
    DuplicateShift { shift_id: String },
    NonPositiveCapacity { shift_id: String },
    UnknownEmergencyRoom { or_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingShift { or_id, day, shift_id } => {
                write!(f, "mss slot ({or_id}, day {day}) references unknown shift {shift_id}")
            }
            Violation::DuplicateMssSlot { or_id, day, shift_id } => {
                write!(f, "duplicate mss slot ({or_id}, day {day}, {shift_id})")
            }
            Violation::DayOutOfRange { or_id, day, planning_days } => write!(
                f,
                "mss slot for {or_id} on day {day} outside horizon of {planning_days} days"
            ),
            Violation::NonPositiveDuration { registration_id } => {
                write!(f, "registration {registration_id} has non-positive duration")
            }
            Violation::NonPositiveActualDuration { registration_id } => {
                write!(f, "registration {registration_id} has non-positive actual duration")
            }
            Violation::InvalidPriority { registration_id, priority } => {
                write!(f, "registration {registration_id} has priority {priority} outside 1..=4")
            }
            Violation::DuplicateRegistration { registration_id } => {
                write!(f, "registration id {registration_id} appears more than once")
            }
            Violation::DuplicateShift { shift_id } => write!(f, "shift {shift_id} defined twice"),
            Violation::NonPositiveCapacity { shift_id } => {
                write!(f, "shift {shift_id} has non-positive capacity")
            }
            Violation::UnknownEmergencyRoom { or_id } => {
                write!(f, "emergency room {or_id} has no mss slot")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of an instance. An empty report means the
/// instance is in solvable form; violations are returned as data.
pub fn validate_instance(instance: &ProblemInstance) -> ValidationReport {
    let mut violations = Vec::new();

    let mut shift_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &instance.shifts {
        *shift_ids.entry(s.shift_id.as_str()).or_default() += 1;
        if s.capacity_min == 0 {
            violations.push(Violation::NonPositiveCapacity {
                shift_id: s.shift_id.clone(),
            });
        }
    }
    for (id, n) in &shift_ids {
        if *n > 1 {
            violations.push(Violation::DuplicateShift {
                shift_id: id.to_string(),
            });
        }
    }

    let mut seen = BTreeSet::new();
    for slot in &instance.mss {
        if !shift_ids.contains_key(slot.shift_id.as_str()) {
            violations.push(Violation::DanglingShift {
                or_id: slot.or_id.clone(),
                day: slot.day,
                shift_id: slot.shift_id.clone(),
            });
        }
        if slot.day >= instance.planning_days {
            violations.push(Violation::DayOutOfRange {
                or_id: slot.or_id.clone(),
                day: slot.day,
                planning_days: instance.planning_days,
            });
        }
        if !seen.insert((slot.or_id.as_str(), slot.shift_id.as_str(), slot.day)) {
            violations.push(Violation::DuplicateMssSlot {
                or_id: slot.or_id.clone(),
                day: slot.day,
                shift_id: slot.shift_id.clone(),
            });
        }
    }

    let mut reg_ids = BTreeSet::new();
    for r in &instance.registrations {
        if !reg_ids.insert(r.id.as_str()) {
            violations.push(Violation::DuplicateRegistration {
                registration_id: r.id.clone(),
            });
        }
        if !(1..=4).contains(&r.priority) {
            violations.push(Violation::InvalidPriority {
                registration_id: r.id.clone(),
                priority: r.priority,
            });
        }
        if r.duration_min == 0 {
            violations.push(Violation::NonPositiveDuration {
                registration_id: r.id.clone(),
            });
        }
        if r.actual_duration_min == Some(0) {
            violations.push(Violation::NonPositiveActualDuration {
                registration_id: r.id.clone(),
            });
        }
    }

    if let Some(er) = &instance.emergency_or_id {
        if !instance.mss.iter().any(|s| &s.or_id == er) {
            violations.push(Violation::UnknownEmergencyRoom { or_id: er.clone() });
        }
    }

    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reg(id: &str, p: u8, sp: &str, d: u32) -> Registration {
        Registration {
            id: id.into(),
            priority: p,
            specialty: sp.into(),
            duration_min: d,
            actual_duration_min: None,
            confidence: None,
        }
    }

    fn two_reg_instance() -> ProblemInstance {
        ProblemInstance {
            registrations: vec![reg("r1", 1, "ORTO", 30), reg("r2", 2, "ORTO", 45)],
            mss: vec![MssSlot {
                or_id: "OR1".into(),
                specialty: "ORTO".into(),
                shift_id: "S1".into(),
                day: 0,
            }],
            shifts: vec![Shift {
                shift_id: "S1".into(),
                capacity_min: 360,
            }],
            emergency_or_id: None,
            planning_days: 5,
        }
    }

    #[test]
    fn well_formed_instance_has_no_violations() {
        assert!(validate_instance(&two_reg_instance()).is_empty());
    }

    #[test]
    fn dangling_shift_is_reported() {
        let mut inst = two_reg_instance();
        inst.mss[0].shift_id = "S9".into();
        let report = validate_instance(&inst);
        assert_eq!(
            report.violations,
            vec![Violation::DanglingShift {
                or_id: "OR1".into(),
                day: 0,
                shift_id: "S9".into()
            }]
        );
    }

    #[test]
    fn zero_duration_is_reported() {
        let mut inst = two_reg_instance();
        inst.registrations[1].duration_min = 0;
        let report = validate_instance(&inst);
        assert_eq!(
            report.violations,
            vec![Violation::NonPositiveDuration {
                registration_id: "r2".into()
            }]
        );
    }

    #[test]
    fn emergency_room_must_exist() {
        let mut inst = two_reg_instance();
        inst.emergency_or_id = Some("OR A".into());
        assert_eq!(validate_instance(&inst).violations.len(), 1);
        inst.emergency_or_id = Some("OR1".into());
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn objective_order_is_lexicographic() {
        let a = ObjectiveVector::from_levels([0, 1, 0, 0, 0, 0]);
        let b = ObjectiveVector::from_levels([0, 0, 9, 9, 99, 99]);
        assert!(b < a);
        assert_eq!(a.unassigned(2), 1);
    }

    #[test]
    fn confidence_level_range() {
        assert!(ConfidenceLevel::new(0).is_none());
        assert!(ConfidenceLevel::new(5).is_none());
        assert_eq!(ConfidenceLevel::new(3), Some(ConfidenceLevel::LOW));
        let parsed: ConfidenceLevel = serde_json::from_str("2").unwrap();
        assert_eq!(parsed, ConfidenceLevel::MODERATE);
        assert!(serde_json::from_str::<ConfidenceLevel>("7").is_err());
    }
}
