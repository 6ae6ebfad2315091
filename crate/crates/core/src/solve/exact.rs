//! Exhaustive branch-and-bound over per-registration choices.
//!
//! Registrations are decided in id order; each one goes to a compatible cell
//! (in `(day, or_id, shift_id)` order) or, unless it has priority 1, stays
//! unassigned as the last option. Depth-first search therefore meets
//! complete assignments in increasing tie order, so once the incumbent comes
//! from the search itself a subtree whose bound merely equals it can be cut.
//! Among cells that are interchangeable at a node (same specialty,
//! capacity, load, confidence load, and emergency status) only the first is
//! tried.

use std::cmp::Ordering;
use std::time::Instant;

use super::problem::{PartialState, Problem, UNASSIGNED};
use super::SolveLimits;
use crate::model::ObjectiveVector;

#[derive(Debug, Clone)]
pub struct ExactResult {
    /// Best complete assignment found, if any.
    pub best: Option<(Vec<usize>, ObjectiveVector)>,
    /// False when a time or node limit stopped the search.
    pub complete: bool,
    pub nodes: u64,
}

struct Search<'a> {
    p: &'a Problem,
    open: Vec<usize>,
    choice: Vec<usize>,
    state: PartialState,
    best: Option<(Vec<usize>, ObjectiveVector)>,
    tie_safe: bool,
    nodes: u64,
    started: Instant,
    limits: &'a SolveLimits,
    aborted: bool,
}

impl Search<'_> {
    fn out_of_budget(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        if self.limits.node_limit.is_some_and(|n| self.nodes >= n)
            || (self.nodes.is_multiple_of(1024)
                && self.started.elapsed().as_secs_f64() > self.limits.time_budget_s)
        {
            self.aborted = true;
        }
        self.aborted
    }

    fn leaf(&mut self) {
        let obj = self.p.objective(&self.choice);
        match &self.best {
            None => {
                self.best = Some((self.choice.clone(), obj));
                self.tie_safe = true;
            }
            Some((inc_choice, inc)) => match obj.cmp(inc) {
                Ordering::Less => {
                    self.best = Some((self.choice.clone(), obj));
                    self.tie_safe = true;
                }
                Ordering::Equal => {
                    if self.choice < *inc_choice {
                        self.best = Some((self.choice.clone(), obj));
                    }
                    self.tie_safe = true;
                }
                Ordering::Greater => {}
            },
        }
    }

    fn pruned(&self, lb: &ObjectiveVector) -> bool {
        match &self.best {
            None => false,
            Some((_, inc)) => match lb.cmp(inc) {
                Ordering::Greater => true,
                Ordering::Equal => self.tie_safe,
                Ordering::Less => false,
            },
        }
    }

    fn dfs(&mut self, depth: usize) {
        self.nodes += 1;
        if self.out_of_budget() {
            return;
        }
        let p = self.p;
        if depth == p.n_regs() {
            self.leaf();
            return;
        }
        let Some(lb) = p.lower_bound(&self.state, &self.open[depth..]) else {
            return;
        };
        if self.pruned(&lb) {
            return;
        }

        let r = depth;
        let mut tried: Vec<(u32, u32, u64, bool)> = Vec::new();
        for &c in &p.compatible[r] {
            if p.capacity[c] - self.state.load[c] < p.duration[r]
                || (p.emergency[c] && self.state.emergency_used)
            {
                continue;
            }
            let signature = (
                p.capacity[c],
                self.state.load[c],
                self.state.conf_sum[c],
                p.emergency[c],
            );
            if tried.contains(&signature) {
                continue;
            }
            tried.push(signature);

            self.choice[r] = c;
            self.state.load[c] += p.duration[r];
            self.state.conf_sum[c] += p.conf[r];
            let was_used = self.state.emergency_used;
            if p.emergency[c] {
                self.state.emergency_used = true;
            }
            self.dfs(depth + 1);
            self.state.emergency_used = was_used;
            self.state.conf_sum[c] -= p.conf[r];
            self.state.load[c] -= p.duration[r];
            self.choice[r] = UNASSIGNED;
            if self.aborted {
                return;
            }
        }
        if p.priority[r] > 1 {
            let k = (p.priority[r] - 1) as usize;
            self.state.unassigned[k] += 1;
            self.dfs(depth + 1);
            self.state.unassigned[k] -= 1;
        }
    }
}

/// Searches for the lexicographically smallest objective and, among equal
/// objectives, the smallest choice vector. `incumbent` (for example a
/// heuristic schedule) only tightens pruning; it is returned only if the
/// search finds nothing at least as good.
pub fn branch_and_bound(
    p: &Problem,
    limits: &SolveLimits,
    incumbent: Option<(Vec<usize>, ObjectiveVector)>,
) -> ExactResult {
    let incumbent = incumbent.filter(|(c, _)| p.is_feasible(c));
    let mut s = Search {
        p,
        open: (0..p.n_regs()).collect(),
        choice: vec![UNASSIGNED; p.n_regs()],
        state: PartialState::empty(p),
        best: incumbent,
        tie_safe: false,
        nodes: 0,
        started: Instant::now(),
        limits,
        aborted: false,
    };
    s.dfs(0);
    ExactResult {
        best: s.best,
        complete: !s.aborted,
        nodes: s.nodes,
    }
}
