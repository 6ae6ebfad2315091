use std::cmp::Ordering;

use ors_core::solve::{
    random_instance, solve_exact, solve_heuristic, ObjectiveMode, RandomInstanceConfig, SolveError,
    SolveLimits,
};

#[test]
fn heuristic_matches_the_exact_optimum_on_most_small_instances() {
    let cfg = RandomInstanceConfig { max_registrations: 9, max_cells: 4, ..RandomInstanceConfig::default() };
    let (mut compared, mut equal) = (0, 0);
    for seed in 0..200u64 {
        let inst = random_instance(&cfg, seed);
        let conf = seed % 2 == 0;
        let mode = if conf { ObjectiveMode::WithConfidence } else { ObjectiveMode::PriorityOnly };
        // without confidence in the objective L2 and L1 are only reported
        let n = if conf { 6 } else { 4 };
        let limits = SolveLimits { seed, max_restarts: 16, threads: 1, ..SolveLimits::default() };
        let exact = solve_exact(&inst, mode, &limits);
        let heur = solve_heuristic(&inst, mode, &limits);
        match (exact, heur) {
            (Ok(e), Ok(h)) => {
                compared += 1;
                let ord = h.schedule.objective.levels()[..n].cmp(&e.schedule.objective.levels()[..n]);
                assert_ne!(ord, Ordering::Less, "seed {seed}: heuristic beat a proven optimum");
                if ord == Ordering::Equal {
                    equal += 1;
                }
            }
            (Err(SolveError::Infeasible { .. }), Err(_)) => {}
            (Err(SolveError::Infeasible { .. }), Ok(_)) => panic!("seed {seed}: heuristic placed an infeasible instance"),
            // a feasible instance the heuristic cannot place counts as a miss
            (Ok(_), Err(_)) => compared += 1,
            (Err(e), _) => panic!("seed {seed}: {e}"),
        }
    }
    eprintln!("optimal on {equal} of {compared}");
    assert!(compared >= 100, "only {compared} feasible instances");
    assert!(equal * 5 >= compared * 4, "heuristic optimal on {equal} of {compared}");
}
