//! Reference implementations used to cross-check `ors-core`.
//!
//! Nothing here shares code with the solvers: the oracle works directly on
//! the instance types and enumerates every assignment function.

use ors_core::ProblemInstance;

/// Objective levels `[L6, L5, L4, L3, L2, L1]` of the best assignment, found
/// by enumerating every map from registrations to MSS slots or "unassigned".
/// Confidence levels count only when `with_confidence` is set. `None` when no
/// assignment places every priority-1 registration.
pub fn brute_force_optimum(instance: &ProblemInstance, with_confidence: bool) -> Option<[u64; 6]> {
    let capacity: Vec<u32> = instance
        .mss
        .iter()
        .map(|s| {
            instance
                .shifts
                .iter()
                .find(|sh| sh.shift_id == s.shift_id)
                .map_or(0, |sh| sh.capacity_min)
        })
        .collect();
    let emergency: Vec<bool> = instance
        .mss
        .iter()
        .map(|s| instance.emergency_or_id.as_deref() == Some(s.or_id.as_str()))
        .collect();
    let mut e = Enumeration {
        instance,
        capacity,
        emergency,
        with_confidence,
        load: vec![0; instance.mss.len()],
        conf: vec![0; instance.mss.len()],
        unassigned: [0; 4],
        emergency_used: 0,
        best: None,
    };
    e.visit(0);
    e.best
}

struct Enumeration<'a> {
    instance: &'a ProblemInstance,
    capacity: Vec<u32>,
    emergency: Vec<bool>,
    with_confidence: bool,
    load: Vec<u32>,
    conf: Vec<u64>,
    unassigned: [u64; 4],
    emergency_used: usize,
    best: Option<[u64; 6]>,
}

impl Enumeration<'_> {
    fn visit(&mut self, i: usize) {
        let regs = &self.instance.registrations;
        if i == regs.len() {
            let max = self.conf.iter().copied().max().unwrap_or(0);
            let min = self.conf.iter().copied().min().unwrap_or(0);
            let u = self.unassigned;
            let levels = [u[0], u[1], u[2], u[3], max, max - min];
            if self.best.is_none_or(|b| levels < b) {
                self.best = Some(levels);
            }
            return;
        }
        let r = &regs[i];
        let weight = if self.with_confidence {
            r.confidence.map_or(0, |c| u64::from(c.level()))
        } else {
            0
        };
        for c in 0..self.instance.mss.len() {
            let fits = self.instance.mss[c].specialty == r.specialty
                && self.load[c] + r.duration_min <= self.capacity[c]
                && !(self.emergency[c] && self.emergency_used >= 1);
            if !fits {
                continue;
            }
            self.load[c] += r.duration_min;
            self.conf[c] += weight;
            self.emergency_used += usize::from(self.emergency[c]);
            self.visit(i + 1);
            self.emergency_used -= usize::from(self.emergency[c]);
            self.conf[c] -= weight;
            self.load[c] -= r.duration_min;
        }
        if r.priority != 1 {
            let p = usize::from(r.priority - 1);
            self.unassigned[p] += 1;
            self.visit(i + 1);
            self.unassigned[p] -= 1;
        }
    }
}
