//! The solvers against closed-form and sampling references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbh_core::cccp::{solve_problem, SolverConfig};
use sbh_core::engine::{solve, Constraint, ConstraintRole, ConvexSubproblem, Tolerances};
use sbh_core::model::{build_effective_gains, drop_topology, FadingParams, TopologyConfig};
use sbh_core::problem::{Budget, Link, PowerProblem, Signal};
use sbh_core::rates::{Limits, P_FLOOR};
use sbh_core::relaxation::{budget_expr, relaxed_objective_expr, RelaxationState};

/// Interference-free parallel links sharing one budget.
fn parallel_links(snr_per_watt: &[f64], cap: f64) -> PowerProblem {
    let n = snr_per_watt.len();
    PowerProblem {
        num_vars: n,
        links: snr_per_watt
            .iter()
            .enumerate()
            .map(|(i, &g)| Link { signal: Signal::Var { var: i, gain: g }, interferers: Vec::new(), noise: 1.0 })
            .collect(),
        weights: vec![1.0; n],
        couplings: Vec::new(),
        budgets: vec![Budget { vars: (0..n).collect(), cap }],
        floors: Vec::new(),
        sinr_gap: 1.0,
        p_floor: P_FLOOR,
    }
}

/// Classic water-filling by bisection on the water level.
fn water_filling(g: &[f64], cap: f64) -> Vec<f64> {
    let alloc = |level: f64| g.iter().map(|gi| (level - 1.0 / gi).max(0.0)).collect::<Vec<_>>();
    let (mut lo, mut hi) = (0.0, cap + g.iter().map(|gi| 1.0 / gi).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alloc(mid).iter().sum::<f64>() > cap {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    alloc(lo)
}

#[test]
fn parallel_links_reach_the_water_filling_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.random_range(1..=5);
        let g: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..2.0))).collect();
        let cap = rng.random_range(0.5..5.0);
        let problem = parallel_links(&g, cap);
        let expected = problem.objective(&water_filling(&g, cap));
        let cfg = SolverConfig { eps1: 1e-9, eps2: 1e-9, t1_max: 200, ..SolverConfig::default() };
        let report = solve_problem(&problem, &cfg, None).unwrap();
        assert!(report.objective <= expected + 1e-6, "{} above the optimum {}", report.objective, expected);
        assert!(expected - report.objective <= 1e-3, "{} vs {} for gains {g:?}", report.objective, expected);
    }
}

#[test]
fn engine_solution_beats_random_feasible_points() {
    let cfg = TopologyConfig { num_antennas: 8, num_mus: 2, num_sbs: 1, ..TopologyConfig::default() };
    let params = FadingParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..5 {
        let ch = build_effective_gains(&drop_topology(&cfg, seed).unwrap(), &params, seed).unwrap();
        let problem = PowerProblem::proposed(&ch.gains, &params, &Limits { r_min_mu: 0.0, ..Limits::default() });
        let relax = RelaxationState::tight_at(&problem, &problem.uniform_start(0.5)).unwrap();
        let d = problem.num_vars;
        let constraints = (0..problem.budgets.len())
            .map(|b| Constraint { expr: budget_expr(&problem, b), role: ConstraintRole::Budget(b), soft: false })
            .collect();
        let upper: Vec<f64> = problem.upper_bounds().iter().map(|u| u.ln()).collect();
        let sub = ConvexSubproblem {
            dim: d,
            objective: relaxed_objective_expr(&problem, &relax),
            constraints,
            lower: vec![P_FLOOR.ln(); d],
            upper: upper.clone(),
        };
        let start: Vec<f64> = problem.uniform_start(0.5).iter().map(|p| p.ln()).collect();
        let report = solve(&sub, &start, &Tolerances::default()).unwrap();
        assert!(report.converged, "{report:?}");
        let mut checked = 0;
        while checked < 10_000 {
            let x: Vec<f64> = upper.iter().map(|u| rng.random_range(P_FLOOR.ln()..*u)).collect();
            if sub.min_constraint(&x) < 0.0 {
                continue;
            }
            checked += 1;
            assert!(sub.objective.value(&x) <= report.objective_value + 1e-9);
        }
    }
}
