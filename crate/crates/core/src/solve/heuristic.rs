//! Greedy construction, local search, and ruin-and-recreate restarts.
//!
//! Construction places priority-1 registrations first by best-fit
//! decreasing, then the others priority by priority. Local search applies
//! first-improvement moves in a fixed order:
//!
//! 1. insert an unassigned registration into a cell with room;
//! 2. insert it after ejecting lower-priority registrations from the cell
//!    (the ejected ones are re-inserted elsewhere when possible);
//! 3. replace an assigned registration by an unassigned one of the same
//!    priority;
//! 4. relocate one registration;
//! 5. swap two registrations between cells.
//!
//! A move is kept only if it strictly improves the search key. With
//! confidence weights the key extends the objective vector by the number of
//! cells sitting at the maximum or minimum confidence load and by the sum of
//! squared loads; both shrink as loads even out. Last comes the sum of
//! squared free minutes per cell, which grows as free time is gathered into
//! fewer cells and so opens room for later insertions. These terms let the
//! search cross plateaus of the plain objective.
//!
//! Restarts run in rounds of [`RESTART_BATCH`]. Every restart of a round
//! perturbs the current best with its own seed derived from
//! `(seed, round, index)` and the best result (lowest index on ties) is kept,
//! so the outcome does not depend on the thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::problem::{PartialState, Problem, UNASSIGNED};
use super::SolveLimits;
use crate::model::ObjectiveVector;
use crate::par::{self, Threads};

pub const RESTART_BATCH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    levels: [u64; 6],
    extremes: u64,
    squares: u64,
    slack: std::cmp::Reverse<u64>,
}

#[derive(Debug, Clone)]
struct State<'a> {
    p: &'a Problem,
    choice: Vec<usize>,
    load: Vec<u32>,
    conf_sum: Vec<u64>,
    members: Vec<Vec<usize>>,
    unassigned: [u64; 4],
    emergency_count: u32,
}

impl<'a> State<'a> {
    fn new(p: &'a Problem) -> Self {
        let mut unassigned = [0u64; 4];
        for &pr in &p.priority {
            unassigned[(pr - 1) as usize] += 1;
        }
        Self {
            p,
            choice: vec![UNASSIGNED; p.n_regs()],
            load: vec![0; p.n_cells()],
            conf_sum: vec![0; p.n_cells()],
            members: vec![Vec::new(); p.n_cells()],
            unassigned,
            emergency_count: 0,
        }
    }

    fn room(&self, c: usize) -> u32 {
        self.p.capacity[c] - self.load[c]
    }

    fn can_place(&self, r: usize, c: usize) -> bool {
        self.room(c) >= self.p.duration[r] && !(self.p.emergency[c] && self.emergency_count >= 1)
    }

    fn place(&mut self, r: usize, c: usize) {
        debug_assert_eq!(self.choice[r], UNASSIGNED);
        self.choice[r] = c;
        self.load[c] += self.p.duration[r];
        self.conf_sum[c] += self.p.conf[r];
        self.members[c].push(r);
        self.unassigned[(self.p.priority[r] - 1) as usize] -= 1;
        if self.p.emergency[c] {
            self.emergency_count += 1;
        }
    }

    fn remove(&mut self, r: usize) -> usize {
        let c = self.choice[r];
        debug_assert_ne!(c, UNASSIGNED);
        self.choice[r] = UNASSIGNED;
        self.load[c] -= self.p.duration[r];
        self.conf_sum[c] -= self.p.conf[r];
        let pos = self.members[c].iter().position(|&x| x == r).expect("member");
        self.members[c].swap_remove(pos);
        self.unassigned[(self.p.priority[r] - 1) as usize] += 1;
        if self.p.emergency[c] {
            self.emergency_count -= 1;
        }
        c
    }

    fn key(&self, with_conf: bool) -> Key {
        let mut levels = [0u64; 6];
        levels[..4].copy_from_slice(&self.unassigned);
        let slack = std::cmp::Reverse(
            (0..self.p.n_cells())
                .map(|c| u64::from(self.room(c)).pow(2))
                .sum(),
        );
        if !with_conf {
            return Key {
                levels,
                extremes: 0,
                squares: 0,
                slack,
            };
        }
        let max = self.conf_sum.iter().copied().max().unwrap_or(0);
        let min = self.conf_sum.iter().copied().min().unwrap_or(0);
        levels[4] = max;
        levels[5] = max - min;
        let extremes = self
            .conf_sum
            .iter()
            .filter(|&&s| s == max || s == min)
            .count() as u64;
        let squares = self.conf_sum.iter().map(|s| s * s).sum();
        Key {
            levels,
            extremes,
            squares,
            slack,
        }
    }

    fn objective(&self) -> ObjectiveVector {
        self.p.objective(&self.choice)
    }

    /// Best-fit cell for `r`: smallest room left after placement, then the
    /// lowest confidence load, then cell order.
    fn best_fit(&self, r: usize, with_conf: bool) -> Option<usize> {
        self.p.compatible[r]
            .iter()
            .copied()
            .filter(|&c| self.can_place(r, c))
            .min_by_key(|&c| {
                let conf = if with_conf { self.conf_sum[c] } else { 0 };
                (conf, self.room(c) - self.p.duration[r], c)
            })
    }
}

fn with_conf(p: &Problem) -> bool {
    p.conf.iter().any(|&c| c > 0)
}

/// Order in which open registrations are offered to cells.
fn insertion_order(p: &Problem, regs: &mut [usize]) {
    regs.sort_by_key(|&r| (p.priority[r], std::cmp::Reverse(p.duration[r]), r));
}

/// Tries to make room for a priority-1 registration by moving another
/// priority-1 registration to a different cell.
fn repair_p1(s: &mut State, r: usize) -> bool {
    let p = s.p;
    for &c in &p.compatible[r] {
        if p.emergency[c] && s.emergency_count >= 1 {
            continue;
        }
        let occupants: Vec<usize> = s.members[c].clone();
        for q in occupants {
            if p.priority[q] != 1 || s.room(c) + p.duration[q] < p.duration[r] {
                continue;
            }
            let target = p.compatible[q]
                .iter()
                .copied()
                .find(|&c2| c2 != c && s.can_place(q, c2));
            if let Some(c2) = target {
                s.remove(q);
                s.place(q, c2);
                if s.can_place(r, c) {
                    s.place(r, c);
                    return true;
                }
                s.remove(q);
                s.place(q, c);
            }
        }
    }
    false
}

/// Ejects lower-priority registrations from `c` (lowest priority and
/// longest first) until `r` fits. Returns the ejected ones, or `None` with
/// the state unchanged if that cannot free enough room.
fn eject_for(s: &mut State, r: usize, c: usize) -> Option<Vec<usize>> {
    let p = s.p;
    let mut candidates: Vec<usize> = s.members[c]
        .iter()
        .copied()
        .filter(|&q| p.priority[q] > p.priority[r])
        .collect();
    candidates.sort_by_key(|&q| (std::cmp::Reverse(p.priority[q]), std::cmp::Reverse(p.duration[q]), q));
    let freeable: u32 = candidates.iter().map(|&q| p.duration[q]).sum();
    if s.room(c) + freeable < p.duration[r] {
        return None;
    }
    let mut ejected = Vec::new();
    for q in candidates {
        if s.room(c) >= p.duration[r] {
            break;
        }
        s.remove(q);
        ejected.push(q);
    }
    if !s.can_place(r, c) {
        for &q in ejected.iter().rev() {
            s.place(q, c);
        }
        return None;
    }
    Some(ejected)
}

fn construct<'a>(p: &'a Problem, rng: Option<&mut ChaCha8Rng>) -> Option<State<'a>> {
    let conf = with_conf(p);
    let mut s = State::new(p);
    let mut p1: Vec<usize> = (0..p.n_regs()).filter(|&r| p.priority[r] == 1).collect();
    insertion_order(p, &mut p1);
    if let Some(rng) = rng {
        p1.shuffle(rng);
    }
    for &r in &p1 {
        match s.best_fit(r, false) {
            Some(c) => s.place(r, c),
            None => {
                if !repair_p1(&mut s, r) {
                    return None;
                }
            }
        }
    }
    let mut rest: Vec<usize> = (0..p.n_regs()).filter(|&r| p.priority[r] > 1).collect();
    insertion_order(p, &mut rest);
    for r in rest {
        if let Some(c) = s.best_fit(r, conf) {
            s.place(r, c);
        }
    }
    Some(s)
}

/// Several seeded attempts at placing every priority-1 registration.
fn initial_state(p: &Problem, seed: u64) -> Option<State<'_>> {
    if let Some(s) = construct(p, None) {
        return Some(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..64).find_map(|_| construct(p, Some(&mut rng)))
}

fn local_search(s: &mut State, deadline: Option<(Instant, f64)>) {
    let p = s.p;
    let conf = with_conf(p);
    let mut current = s.key(conf);
    let out_of_time = || deadline.is_some_and(|(t0, b)| t0.elapsed().as_secs_f64() > b);
    loop {
        let mut improved = false;

        let mut open: Vec<usize> = (0..p.n_regs()).filter(|&r| s.choice[r] == UNASSIGNED).collect();
        insertion_order(p, &mut open);
        for &r in &open {
            if s.choice[r] != UNASSIGNED {
                continue;
            }
            // plain insertion: improves the priority counts whenever it fits
            if let Some(c) = s.best_fit(r, conf) {
                s.place(r, c);
                current = s.key(conf);
                improved = true;
                continue;
            }
            for &c in &p.compatible[r] {
                let Some(ejected) = eject_for(s, r, c) else { continue };
                s.place(r, c);
                for &q in &ejected {
                    if let Some(c2) = s.best_fit(q, conf) {
                        s.place(q, c2);
                    }
                }
                let k = s.key(conf);
                if k < current {
                    current = k;
                    improved = true;
                    break;
                }
                for &q in &ejected {
                    if s.choice[q] != UNASSIGNED {
                        s.remove(q);
                    }
                }
                s.remove(r);
                for &q in &ejected {
                    s.place(q, c);
                }
            }
        }

        if !out_of_time() {
            // replace an assigned registration by an open one of equal priority
            for r in 0..p.n_regs() {
                if s.choice[r] != UNASSIGNED {
                    continue;
                }
                for &c in &p.compatible[r] {
                    let occupants = s.members[c].clone();
                    for a in occupants {
                        if p.priority[a] != p.priority[r]
                            || s.room(c) + p.duration[a] < p.duration[r]
                        {
                            continue;
                        }
                        s.remove(a);
                        if !s.can_place(r, c) {
                            s.place(a, c);
                            continue;
                        }
                        s.place(r, c);
                        let k = s.key(conf);
                        if k < current {
                            current = k;
                            improved = true;
                            break;
                        }
                        s.remove(r);
                        s.place(a, c);
                    }
                    if s.choice[r] != UNASSIGNED {
                        break;
                    }
                }
            }

            // relocate
            for r in 0..p.n_regs() {
                let from = s.choice[r];
                if from == UNASSIGNED {
                    continue;
                }
                for &c in &p.compatible[r] {
                    if c == from {
                        continue;
                    }
                    s.remove(r);
                    if s.can_place(r, c) {
                        s.place(r, c);
                        let k = s.key(conf);
                        if k < current {
                            current = k;
                            improved = true;
                            break;
                        }
                        s.remove(r);
                    }
                    s.place(r, from);
                }
            }

            // swap
            for a in 0..p.n_regs() {
                if out_of_time() {
                    break;
                }
                for b in a + 1..p.n_regs() {
                    let (ca, cb) = (s.choice[a], s.choice[b]);
                    if ca == UNASSIGNED
                        || cb == UNASSIGNED
                        || ca == cb
                        || p.group[a] != p.group[b]
                        || (p.conf[a] == p.conf[b] && p.duration[a] == p.duration[b])
                    {
                        continue;
                    }
                    let (da, db) = (p.duration[a], p.duration[b]);
                    if s.room(ca) + da < db || s.room(cb) + db < da {
                        continue;
                    }
                    s.remove(a);
                    s.remove(b);
                    s.place(a, cb);
                    s.place(b, ca);
                    let k = s.key(conf);
                    if k < current {
                        current = k;
                        improved = true;
                    } else {
                        s.remove(a);
                        s.remove(b);
                        s.place(a, ca);
                        s.place(b, cb);
                    }
                }
            }
        }

        if !improved || out_of_time() {
            break;
        }
    }
}

fn ruin_and_recreate<'a>(best: &State<'a>, rng: &mut ChaCha8Rng) -> Option<State<'a>> {
    let p = best.p;
    let conf = with_conf(p);
    let mut s = best.clone();
    if p.n_cells() > 0 && rng.random_bool(0.5) {
        let n_clear = rng.random_range(1..=2.min(p.n_cells()));
        for _ in 0..n_clear {
            let c = rng.random_range(0..p.n_cells());
            for r in s.members[c].clone() {
                s.remove(r);
            }
        }
    } else {
        let share = rng.random_range(0.1..0.4);
        for r in 0..p.n_regs() {
            if s.choice[r] != UNASSIGNED && rng.random_bool(share) {
                s.remove(r);
            }
        }
    }
    let mut open: Vec<usize> = (0..p.n_regs()).filter(|&r| s.choice[r] == UNASSIGNED).collect();
    open.shuffle(rng);
    open.sort_by_key(|&r| p.priority[r]);
    for r in open {
        let mut cells: Vec<usize> = p.compatible[r]
            .iter()
            .copied()
            .filter(|&c| s.can_place(r, c))
            .collect();
        if cells.is_empty() {
            if p.priority[r] == 1 {
                let placed = p.compatible[r].iter().any(|&c| match eject_for(&mut s, r, c) {
                    Some(_) => {
                        s.place(r, c);
                        true
                    }
                    None => false,
                });
                if !placed && !repair_p1(&mut s, r) {
                    return None;
                }
            }
            continue;
        }
        cells.sort_by_key(|&c| {
            let noise = rng.random_range(0..3u32);
            let conf_part = if conf { s.conf_sum[c] } else { 0 };
            (conf_part, (s.room(c) - p.duration[r]).saturating_add(noise), c)
        });
        s.place(r, cells[0]);
    }
    local_search(&mut s, None);
    Some(s)
}

/// Result of a heuristic run on a compiled problem.
#[derive(Debug, Clone)]
pub struct HeuristicResult {
    pub choice: Vec<usize>,
    pub objective: ObjectiveVector,
    pub proven_optimal: bool,
    pub restarts: usize,
}

/// Runs construction, local search, and restarts. `None` means no placement
/// of every priority-1 registration was found.
pub fn run_heuristic(p: &Problem, limits: &SolveLimits) -> Option<HeuristicResult> {
    let t0 = Instant::now();
    let conf = with_conf(p);
    let mut best = initial_state(p, limits.seed)?;
    local_search(&mut best, Some((t0, limits.time_budget_s)));
    let all: Vec<usize> = (0..p.n_regs()).collect();
    let root = p.lower_bound(&PartialState::empty(p), &all);
    let is_optimal = |s: &State| root.is_some_and(|lb| s.key(conf).levels == lb.levels());

    let mut restarts = 0;
    let mut round = 0u64;
    while restarts < limits.max_restarts
        && !is_optimal(&best)
        && t0.elapsed().as_secs_f64() < limits.time_budget_s
    {
        let batch = RESTART_BATCH.min(limits.max_restarts - restarts);
        let snapshot = best.clone();
        let results = par::map_indexed(batch, Threads(limits.threads), |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(limits.seed);
            rng.set_stream((round << 8) | i as u64);
            ruin_and_recreate(&snapshot, &mut rng)
        });
        let mut best_key = best.key(conf);
        for s in results.into_iter().flatten() {
            let k = s.key(conf);
            if k < best_key {
                best_key = k;
                best = s;
            }
        }
        restarts += batch;
        round += 1;
    }
    Some(HeuristicResult {
        proven_optimal: is_optimal(&best),
        objective: best.objective(),
        choice: best.choice,
        restarts,
    })
}

/// Greedy construction followed by one local search, without restarts.
pub fn quick_incumbent(p: &Problem) -> Option<(Vec<usize>, ObjectiveVector)> {
    let mut s = initial_state(p, 0)?;
    local_search(&mut s, None);
    let objective = s.objective();
    Some((s.choice, objective))
}
