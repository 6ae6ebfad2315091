//! Index-based view of an instance shared by both solvers.

use serde::{Deserialize, Serialize};

use crate::model::{Assignment, ObjectiveVector, ProblemInstance, Schedule};

/// Whether confidence levels enter the objective. With
/// [`ObjectiveMode::PriorityOnly`] the two balancing levels carry zero
/// weight during search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    #[default]
    PriorityOnly,
    WithConfidence,
}

/// One MSS cell: an operating room on a day in a shift.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub day: u32,
    pub or_id: String,
    pub shift_id: String,
}

/// Registrations sorted by id and cells sorted by `(day, or_id, shift_id)`.
/// `compatible[r]` lists, in cell order, the cells of the right specialty
/// whose capacity can hold registration `r` on its own.
#[derive(Debug, Clone)]
pub struct Problem {
    pub ids: Vec<String>,
    pub priority: Vec<u8>,
    pub duration: Vec<u32>,
    pub conf: Vec<u64>,
    pub group: Vec<usize>,
    pub cells: Vec<CellKey>,
    pub cell_group: Vec<usize>,
    pub capacity: Vec<u32>,
    pub emergency: Vec<bool>,
    pub compatible: Vec<Vec<usize>>,
    pub n_groups: usize,
}

pub const UNASSIGNED: usize = usize::MAX;

impl Problem {
    /// Expects an instance that passed validation.
    pub fn new(instance: &ProblemInstance, mode: ObjectiveMode) -> Self {
        let mut regs: Vec<_> = instance.registrations.iter().collect();
        regs.sort_by(|a, b| a.id.cmp(&b.id));
        let mut slots: Vec<_> = instance.mss.iter().collect();
        slots.sort_by(|a, b| {
            (a.day, &a.or_id, &a.shift_id).cmp(&(b.day, &b.or_id, &b.shift_id))
        });

        let mut specialties: Vec<&str> = slots
            .iter()
            .map(|s| s.specialty.as_str())
            .chain(regs.iter().map(|r| r.specialty.as_str()))
            .collect();
        specialties.sort_unstable();
        specialties.dedup();
        let group_of = |s: &str| specialties.binary_search(&s).expect("collected above");

        let cells: Vec<CellKey> = slots
            .iter()
            .map(|s| CellKey {
                day: s.day,
                or_id: s.or_id.clone(),
                shift_id: s.shift_id.clone(),
            })
            .collect();
        let capacity: Vec<u32> = slots
            .iter()
            .map(|s| instance.shift_capacity(&s.shift_id).unwrap_or(0))
            .collect();
        let cell_group: Vec<usize> = slots.iter().map(|s| group_of(&s.specialty)).collect();
        let emergency: Vec<bool> = slots
            .iter()
            .map(|s| instance.emergency_or_id.as_deref() == Some(s.or_id.as_str()))
            .collect();
        let group: Vec<usize> = regs.iter().map(|r| group_of(&r.specialty)).collect();
        let compatible = regs
            .iter()
            .zip(&group)
            .map(|(r, &g)| {
                (0..cells.len())
                    .filter(|&c| cell_group[c] == g && capacity[c] >= r.duration_min)
                    .collect()
            })
            .collect();
        Self {
            ids: regs.iter().map(|r| r.id.clone()).collect(),
            priority: regs.iter().map(|r| r.priority).collect(),
            duration: regs.iter().map(|r| r.duration_min).collect(),
            conf: regs
                .iter()
                .map(|r| match mode {
                    ObjectiveMode::WithConfidence => r.confidence.map_or(0, |c| u64::from(c.level())),
                    ObjectiveMode::PriorityOnly => 0,
                })
                .collect(),
            group,
            cells,
            cell_group,
            capacity,
            emergency,
            compatible,
            n_groups: specialties.len(),
        }
    }

    pub fn n_regs(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Multiplies every confidence weight by `k`.
    pub fn scale_confidence(&mut self, k: u64) {
        for c in &mut self.conf {
            *c *= k;
        }
    }

    pub fn p1_ids(&self) -> Vec<String> {
        (0..self.n_regs())
            .filter(|&r| self.priority[r] == 1)
            .map(|r| self.ids[r].clone())
            .collect()
    }

    /// Objective of a complete choice vector (`UNASSIGNED` for none).
    pub fn objective(&self, choice: &[usize]) -> ObjectiveVector {
        let mut levels = [0u64; 6];
        let mut sums = vec![0u64; self.n_cells()];
        for (r, &c) in choice.iter().enumerate() {
            if c == UNASSIGNED {
                levels[(self.priority[r] - 1) as usize] += 1;
            } else {
                sums[c] += self.conf[r];
            }
        }
        let max = sums.iter().copied().max().unwrap_or(0);
        let min = sums.iter().copied().min().unwrap_or(0);
        levels[4] = max;
        levels[5] = max - min;
        ObjectiveVector::from_levels(levels)
    }

    /// Hard-constraint check of a choice vector.
    pub fn is_feasible(&self, choice: &[usize]) -> bool {
        let mut load = vec![0u64; self.n_cells()];
        let mut emergency = 0;
        for (r, &c) in choice.iter().enumerate() {
            if c == UNASSIGNED {
                if self.priority[r] == 1 {
                    return false;
                }
                continue;
            }
            if self.cell_group[c] != self.group[r] {
                return false;
            }
            load[c] += u64::from(self.duration[r]);
            if self.emergency[c] {
                emergency += 1;
            }
        }
        emergency <= 1 && load.iter().zip(&self.capacity).all(|(l, &cap)| *l <= u64::from(cap))
    }

    pub fn to_schedule(&self, choice: &[usize], objective: ObjectiveVector) -> Schedule {
        let assignments = choice
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != UNASSIGNED)
            .map(|(r, &c)| Assignment {
                registration_id: self.ids[r].clone(),
                priority: self.priority[r],
                or_id: self.cells[c].or_id.clone(),
                day: self.cells[c].day,
                shift_id: self.cells[c].shift_id.clone(),
            })
            .collect();
        Schedule {
            assignments,
            objective,
        }
    }

    /// Lower bound on the objective of every feasible completion of a
    /// partial assignment in which registrations `open` are still
    /// open. `None` means no feasible completion exists.
    pub fn lower_bound(&self, state: &PartialState, open: &[usize]) -> Option<ObjectiveVector> {
        let mut levels = [0u64; 6];
        levels[..4].copy_from_slice(&state.unassigned[..4]);

        let mut residual = vec![0u64; self.n_groups];
        let mut max_room = vec![0u32; self.n_groups];
        for c in 0..self.n_cells() {
            let room = self.capacity[c].saturating_sub(state.load[c]);
            if self.emergency[c] && state.emergency_used {
                continue;
            }
            residual[self.cell_group[c]] += u64::from(room);
            max_room[self.cell_group[c]] = max_room[self.cell_group[c]].max(room);
        }

        let mut p1_need = vec![0u64; self.n_groups];
        let mut by_prio: Vec<Vec<Vec<u32>>> = vec![vec![Vec::new(); 3]; self.n_groups];
        for &r in open {
            let g = self.group[r];
            let fits = self.compatible[r].iter().any(|&c| {
                !(self.emergency[c] && state.emergency_used)
                    && self.capacity[c] - state.load[c].min(self.capacity[c]) >= self.duration[r]
            });
            match self.priority[r] {
                1 => {
                    if !fits {
                        return None;
                    }
                    p1_need[g] += u64::from(self.duration[r]);
                }
                p => {
                    if fits && self.duration[r] <= max_room[g] {
                        by_prio[g][(p - 2) as usize].push(self.duration[r]);
                    } else {
                        levels[(p - 1) as usize] += 1;
                    }
                }
            }
        }
        for g in 0..self.n_groups {
            if p1_need[g] > residual[g] {
                return None;
            }
            let room = residual[g] - p1_need[g];
            for (k, items) in by_prio[g].iter_mut().enumerate() {
                let total: u64 = items.iter().map(|&d| u64::from(d)).sum();
                if total <= room {
                    continue;
                }
                items.sort_unstable_by(|a, b| b.cmp(a));
                let mut excess = total - room;
                let mut drops = 0;
                for &d in items.iter() {
                    if excess == 0 {
                        break;
                    }
                    excess = excess.saturating_sub(u64::from(d));
                    drops += 1;
                }
                levels[k + 1] += drops;
            }
        }

        let cur_max = state.conf_sum.iter().copied().max().unwrap_or(0);
        let mut potential = state.conf_sum.clone();
        for &r in open {
            if self.conf[r] == 0 {
                continue;
            }
            for &c in &self.compatible[r] {
                potential[c] += self.conf[r];
            }
        }
        let min_reach = potential.iter().copied().min().unwrap_or(0);
        levels[4] = cur_max;
        levels[5] = cur_max.saturating_sub(min_reach);
        Some(ObjectiveVector::from_levels(levels))
    }
}

/// Running totals of a partial assignment.
#[derive(Debug, Clone)]
pub struct PartialState {
    pub load: Vec<u32>,
    pub conf_sum: Vec<u64>,
    pub unassigned: [u64; 4],
    pub emergency_used: bool,
}

impl PartialState {
    pub fn empty(p: &Problem) -> Self {
        Self {
            load: vec![0; p.n_cells()],
            conf_sum: vec![0; p.n_cells()],
            unassigned: [0; 4],
            emergency_used: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConfidenceLevel, MssSlot, Registration, Shift};

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

    fn instance(regs: Vec<Registration>, n_cells: u32, cap: u32) -> ProblemInstance {
        ProblemInstance {
            registrations: regs,
            mss: (0..n_cells)
                .map(|d| MssSlot {
                    or_id: "OR1".into(),
                    specialty: "A".into(),
                    shift_id: "S1".into(),
                    day: n_cells - 1 - d,
                })
                .collect(),
            shifts: vec![Shift {
                shift_id: "S1".into(),
                capacity_min: cap,
            }],
            emergency_or_id: None,
            planning_days: n_cells,
        }
    }

    #[test]
    fn cells_sorted_and_oversized_excluded() {
        let p = Problem::new(
            &instance(vec![reg("b", 2, 5, None), reg("a", 1, 50, None)], 3, 10),
            ObjectiveMode::PriorityOnly,
        );
        assert_eq!(p.ids, vec!["a", "b"]);
        assert_eq!(p.cells.iter().map(|c| c.day).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(p.compatible[0].is_empty());
        assert_eq!(p.compatible[1], vec![0, 1, 2]);
    }

    #[test]
    fn objective_counts_empty_cells() {
        let inst = instance(
            vec![reg("a", 2, 1, Some(1)), reg("b", 2, 1, Some(2)), reg("c", 3, 1, None)],
            2,
            10,
        );
        let p = Problem::new(&inst, ObjectiveMode::WithConfidence);
        let v = p.objective(&[0, 0, UNASSIGNED]);
        assert_eq!(v.levels(), [0, 0, 1, 0, 3, 3]);
        let q = Problem::new(&inst, ObjectiveMode::PriorityOnly);
        assert_eq!(q.objective(&[0, 0, UNASSIGNED]).levels(), [0, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn root_bound_counts_forced_drops() {
        let inst = instance(
            vec![reg("a", 1, 6, None), reg("b", 2, 6, None), reg("c", 2, 3, None)],
            1,
            10,
        );
        let p = Problem::new(&inst, ObjectiveMode::PriorityOnly);
        let lb = p.lower_bound(&PartialState::empty(&p), &[0, 1, 2]).unwrap();
        assert_eq!(lb.levels()[1], 1);
        let inst = instance(vec![reg("a", 1, 6, None), reg("b", 1, 6, None)], 1, 10);
        let p = Problem::new(&inst, ObjectiveMode::PriorityOnly);
        assert!(p.lower_bound(&PartialState::empty(&p), &[0, 1]).is_none());
    }
}
