//! Seeded random instances for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{ConfidenceLevel, MssSlot, ProblemInstance, Registration, Shift};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstanceConfig {
    /// Registration count is drawn from `0..=max_registrations`.
    pub max_registrations: usize,
    /// MSS cell count is drawn from `1..=max_cells`.
    pub max_cells: usize,
    pub specialties: usize,
    pub shifts: usize,
    /// Probability that a registration has priority 1.
    pub p1_probability: f64,
    /// Probability that "OR A", when it appears in the MSS, is the emergency
    /// room.
    pub emergency_probability: f64,
    pub capacity: (u32, u32),
    pub duration: (u32, u32),
    pub with_confidence: bool,
}

impl Default for RandomInstanceConfig {
    fn default() -> Self {
        Self {
            max_registrations: 10,
            max_cells: 4,
            specialties: 2,
            shifts: 2,
            p1_probability: 0.15,
            emergency_probability: 0.3,
            capacity: (60, 240),
            duration: (10, 150),
            with_confidence: true,
        }
    }
}

/// A valid instance; some priority-1 registrations may still be unplaceable.
pub fn random_instance(config: &RandomInstanceConfig, seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specialty = |i: usize| format!("SP{i}");
    let shifts: Vec<Shift> = (0..config.shifts.max(1))
        .map(|i| Shift {
            shift_id: format!("S{i}"),
            capacity_min: rng.random_range(config.capacity.0..=config.capacity.1),
        })
        .collect();

    let n_cells = rng.random_range(1..=config.max_cells.max(1));
    let rooms = ["OR A", "OR1", "OR2"];
    let mut mss: Vec<MssSlot> = Vec::with_capacity(n_cells);
    while mss.len() < n_cells {
        let slot = MssSlot {
            or_id: rooms[rng.random_range(0..rooms.len())].to_string(),
            specialty: specialty(rng.random_range(0..config.specialties.max(1))),
            shift_id: shifts[rng.random_range(0..shifts.len())].shift_id.clone(),
            day: rng.random_range(0..3),
        };
        let taken = mss
            .iter()
            .any(|s| (s.day, &s.or_id, &s.shift_id) == (slot.day, &slot.or_id, &slot.shift_id));
        if !taken {
            mss.push(slot);
        }
    }

    let emergency = mss.iter().any(|s| s.or_id == "OR A")
        && rng.random_bool(config.emergency_probability);
    let n_regs = rng.random_range(0..=config.max_registrations);
    let registrations = (0..n_regs)
        .map(|i| {
            let priority = if rng.random_bool(config.p1_probability) {
                1
            } else {
                rng.random_range(2..=4)
            };
            let duration_min = rng.random_range(config.duration.0..=config.duration.1);
            let confidence = config
                .with_confidence
                .then(|| ConfidenceLevel::new(rng.random_range(1..=4)).expect("level in range"));
            Registration {
                id: format!("r{i:03}"),
                priority,
                specialty: specialty(rng.random_range(0..config.specialties.max(1))),
                duration_min,
                actual_duration_min: Some(duration_min),
                confidence,
            }
        })
        .collect();

    ProblemInstance {
        registrations,
        mss,
        shifts,
        emergency_or_id: emergency.then(|| "OR A".to_string()),
        planning_days: 3,
    }
}
