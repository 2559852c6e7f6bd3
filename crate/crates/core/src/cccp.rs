//! Concave-convex procedure on the relaxed problem, the slack-based search for
//! a feasible start, and the outer loop that retightens the rate bounds.
//!
//! Every subproblem keeps two versions of each backhaul coupling: the relaxed
//! one, `Rbar_b(x) - Rhat_s(x; x_t) >= 0`, and a concave minorant of the exact
//! coupling (see [`exact_coupling_minorant`]). With the exact floors and
//! budgets this keeps every accepted iterate feasible for the original,
//! unrelaxed constraint set.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{self, ConcaveExpr, Constraint, ConstraintRole, ConvexSubproblem, Tolerances};
use crate::math::{exp, ln};
use crate::model::{ChannelRealization, FadingParams};
use crate::problem::PowerProblem;
use crate::rates::{Limits, FEAS_TOL};
use crate::relaxation::{
    budget_expr, exact_coupling_minorant, floor_expr, relaxed_link_expr, relaxed_objective_expr, LogPowerVector, RelaxationState,
};
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Outer (retightening) iterations.
    pub t1_max: usize,
    /// Inner CCCP iterations per outer step.
    pub t2_max: usize,
    /// Feasibility-search rounds.
    pub t3_max: usize,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub limits: Limits,
    /// Fraction of every budget used by the default uniform start.
    pub start_fraction: f64,
    /// An inner solve losing more than this is discarded.
    pub regression_tol: f64,
    pub engine: Tolerances,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t1_max: 30,
            t2_max: 50,
            t3_max: 50,
            eps1: 1e-4,
            eps2: 1e-4,
            eps3: 1e-4,
            limits: Limits::default(),
            start_fraction: 0.5,
            regression_tol: 1e-8,
            engine: Tolerances::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.t1_max == 0 || self.t2_max == 0 || self.t3_max == 0 {
            return Err(Error::InvalidConfig("iteration caps must be at least 1"));
        }
        if !(self.eps1 > 0.0 && self.eps2 > 0.0 && self.eps3 > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive"));
        }
        if !(self.start_fraction > 0.0 && self.start_fraction < 1.0) {
            return Err(Error::InvalidConfig("start fraction must lie in (0, 1)"));
        }
        self.limits.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    IterationCap,
    Infeasible,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::IterationCap => "iteration_cap",
            Termination::Infeasible => "infeasible",
        }
    }
}

/// One CCCP run at a fixed relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRun {
    /// Log-power iterates, starting point first.
    pub iterates: Vec<Vec<f64>>,
    /// Relaxed objective at each iterate.
    pub relaxed_trace: Vec<f64>,
    /// Largest violation of the original constraints at each iterate.
    pub violations: Vec<f64>,
    pub converged: bool,
    /// Stopped because a solve came back worse than the incumbent.
    pub regressed: bool,
    /// `|Rbar_b - Rbar_s|` per coupling at the last iterate.
    pub c1_activity: Vec<f64>,
}

impl InnerRun {
    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("inner run holds its start")
    }

    /// Solves performed (the start is not counted).
    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    /// Linear watts, in the problem's variable order.
    pub final_powers: Vec<f64>,
    pub final_rates: Vec<f64>,
    pub objective: f64,
    /// True objective at the feasible start and after each outer step.
    pub outer_trace: Vec<f64>,
    pub inner_runs: Vec<InnerRun>,
    /// Slack reached in each feasibility round.
    pub phase1_slack: Vec<f64>,
    pub c1_activity: Vec<f64>,
    pub termination: Termination,
}

impl SolverReport {
    pub fn inner_iterations(&self) -> usize {
        self.inner_runs.iter().map(InnerRun::iterations).sum()
    }
}

/// Constraint pieces that do not depend on the linearization point.
struct Assembly {
    budgets: Vec<ConcaveExpr>,
    floors: Vec<ConcaveExpr>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Assembly {
    fn new(problem: &PowerProblem) -> Self {
        let budgets = (0..problem.budgets.len()).map(|b| budget_expr(problem, b)).collect();
        let floors = (0..problem.floors.len()).map(|f| floor_expr(problem, f)).collect();
        let lower = vec![ln(problem.p_floor); problem.num_vars];
        let upper = problem.upper_bounds().into_iter().map(|u| ln(u) + 1.0).collect();
        Self { budgets, floors, lower, upper }
    }

    fn subproblem(&self, problem: &PowerProblem, relax: &RelaxationState, x_t: &[f64], objective: ConcaveExpr) -> ConvexSubproblem {
        let mut constraints = Vec::with_capacity(2 * problem.couplings.len() + self.budgets.len() + self.floors.len());
        for (i, cp) in problem.couplings.iter().enumerate() {
            let mut relaxed = relaxed_link_expr(problem, relax, cp.backhaul);
            relaxed.add_scaled(&taylor_linearize_su(problem, relax, i, x_t), -1.0);
            constraints.push(Constraint { expr: relaxed, role: ConstraintRole::Coupling(i), soft: true });
            constraints.push(Constraint {
                expr: exact_coupling_minorant(problem, i, x_t),
                role: ConstraintRole::CouplingExact(i),
                soft: true,
            });
        }
        for (i, e) in self.budgets.iter().enumerate() {
            constraints.push(Constraint { expr: e.clone(), role: ConstraintRole::Budget(i), soft: false });
        }
        for (i, e) in self.floors.iter().enumerate() {
            constraints.push(Constraint { expr: e.clone(), role: ConstraintRole::Floor(i), soft: true });
        }
        ConvexSubproblem { dim: problem.num_vars, objective, constraints, lower: self.lower.clone(), upper: self.upper.clone() }
    }
}

/// Tangent of the relaxed access rate of coupling `c` at `anchor`.
pub fn taylor_linearize_su(problem: &PowerProblem, relax: &RelaxationState, c: usize, anchor: &[f64]) -> ConcaveExpr {
    relaxed_link_expr(problem, relax, problem.couplings[c].access).tangent(anchor)
}

fn powers(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| exp(v)).collect()
}

fn c1_activity(problem: &PowerProblem, relax: &RelaxationState, x: &[f64]) -> Vec<f64> {
    problem
        .couplings
        .iter()
        .map(|cp| (relaxed_link_expr(problem, relax, cp.backhaul).value(x) - relaxed_link_expr(problem, relax, cp.access).value(x)).abs())
        .collect()
}

/// Relaxed couplings `Rbar_b - Rbar_s` at `x`.
fn relaxed_couplings(problem: &PowerProblem, relax: &RelaxationState, x: &[f64]) -> Vec<f64> {
    let rate = |l: usize| relaxed_link_expr(problem, relax, l).value(x);
    problem.couplings.iter().map(|cp| rate(cp.backhaul) - rate(cp.access)).collect()
}

/// Feasible for the original constraints and the relaxed couplings.
fn is_start_feasible(problem: &PowerProblem, relax: &RelaxationState, x: &[f64]) -> bool {
    problem.residuals(&powers(x)).max_violation() <= FEAS_TOL && relaxed_couplings(problem, relax, x).iter().all(|&g| g >= -FEAS_TOL)
}

/// Scales `p` into every budget with a small margin and lifts it off the
/// power floor, returning log powers.
pub fn project_start(problem: &PowerProblem, p: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = p.iter().map(|&v| if v.is_finite() { v.max(problem.p_floor) } else { problem.p_floor }).collect();
    for b in &problem.budgets {
        let total: f64 = b.vars.iter().map(|&v| p[v]).sum();
        let limit = 0.999 * b.cap;
        if total > limit {
            for &v in &b.vars {
                p[v] *= limit / total;
            }
        }
    }
    let lo = ln(problem.p_floor) + 1e-6;
    p.iter().map(|&v| ln(v).max(lo)).collect()
}

/// Slack search for a point feasible for the relaxed problem. Each round
/// re-anchors the relaxation at the current point, so the relaxed couplings
/// coincide there with the exact ones. Returns the point, the relaxation it is
/// feasible under, and the slack reached in each round.
pub fn find_feasible_start(
    problem: &PowerProblem,
    relax: &RelaxationState,
    start: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, RelaxationState, Vec<f64>), Error> {
    let assembly = Assembly::new(problem);
    let mut x = start.to_vec();
    let mut relax = relax.clone();
    let mut trace = Vec::new();
    if is_start_feasible(problem, &relax, &x) {
        return Ok((x, relax, trace));
    }
    let mut best = f64::NEG_INFINITY;
    for round in 0..cfg.t3_max {
        if round > 0 {
            relax = RelaxationState::tight_at(problem, &powers(&x))?;
        }
        let sub = assembly.subproblem(problem, &relax, &x, ConcaveExpr::default());
        let (rep, s) = engine::solve_feasibility(&sub, &x, &cfg.engine)?;
        x = rep.solution;
        best = best.max(s);
        let stalled = trace.last().is_some_and(|&prev: &f64| (s - prev).abs() <= cfg.eps3);
        trace.push(s);
        if s >= 0.0 && is_start_feasible(problem, &relax, &x) {
            return Ok((x, relax, trace));
        }
        if stalled && s < 0.0 {
            break;
        }
    }
    Err(Error::Infeasible { best_slack: best })
}

/// Concave-convex iterations at a fixed relaxation, from a start feasible for
/// the relaxed problem.
pub fn cccp_inner(problem: &PowerProblem, relax: &RelaxationState, start: &[f64], cfg: &SolverConfig) -> Result<InnerRun, Error> {
    let assembly = Assembly::new(problem);
    let objective = relaxed_objective_expr(problem, relax);
    let mut x = start.to_vec();
    let mut current = objective.value(&x);
    let mut run = InnerRun {
        iterates: vec![x.clone()],
        relaxed_trace: vec![current],
        violations: vec![problem.residuals(&powers(&x)).max_violation()],
        converged: false,
        regressed: false,
        c1_activity: Vec::new(),
    };
    for _ in 0..cfg.t2_max {
        let sub = assembly.subproblem(problem, relax, &x, objective.clone());
        let rep = engine::solve(&sub, &x, &cfg.engine)?;
        let value = objective.value(&rep.solution);
        if value < current - cfg.regression_tol {
            run.regressed = true;
            run.converged = true;
            break;
        }
        x = rep.solution;
        run.violations.push(problem.residuals(&powers(&x)).max_violation());
        run.iterates.push(x.clone());
        run.relaxed_trace.push(value);
        let change = (value - current).abs();
        current = value;
        if change <= cfg.eps2 {
            run.converged = true;
            break;
        }
    }
    run.c1_activity = c1_activity(problem, relax, &x);
    Ok(run)
}

/// Full procedure: feasibility search from `start` (or the uniform default),
/// then CCCP runs with retightening until the true objective settles.
pub fn solve_problem(problem: &PowerProblem, cfg: &SolverConfig, start: Option<&[f64]>) -> Result<SolverReport, Error> {
    problem.validate()?;
    cfg.validate()?;
    let p0 = match start {
        Some(p) if p.len() == problem.num_vars => p.to_vec(),
        Some(p) => return Err(Error::Dimension { expected: problem.num_vars, got: p.len() }),
        None => problem.uniform_start(cfg.start_fraction),
    };
    let x0 = project_start(problem, &p0);
    let relax0 = RelaxationState::tight_at(problem, &powers(&x0))?;
    let (mut x, _, phase1_slack) = find_feasible_start(problem, &relax0, &x0, cfg)?;

    let mut relax = RelaxationState::tight_at(problem, &powers(&x))?;
    let mut previous = problem.objective(&powers(&x));
    let mut outer_trace = vec![previous];
    let mut inner_runs = Vec::new();
    let mut outer_converged = false;
    let mut c1 = c1_activity(problem, &relax, &x);
    for _ in 0..cfg.t1_max {
        let run = cccp_inner(problem, &relax, &x, cfg)?;
        x = run.last().to_vec();
        c1 = run.c1_activity.clone();
        inner_runs.push(run);
        let p = powers(&x);
        let value = problem.objective(&p);
        relax = relax.retighten(&problem.sinrs(&p), problem.sinr_gap)?;
        outer_trace.push(value);
        let change = (value - previous).abs();
        previous = value;
        if change <= cfg.eps1 {
            outer_converged = true;
            break;
        }
    }
    let termination =
        if outer_converged && inner_runs.iter().all(|r| r.converged) { Termination::Converged } else { Termination::IterationCap };
    let final_powers = powers(&x);
    Ok(SolverReport {
        final_rates: problem.rates(&final_powers),
        objective: problem.objective(&final_powers),
        final_powers,
        outer_trace,
        inner_runs,
        phase1_slack,
        c1_activity: c1,
        termination,
    })
}

/// Solves the full-duplex problem of one channel realization.
pub fn solve_overall(channel: &ChannelRealization, params: &FadingParams, cfg: &SolverConfig) -> Result<SolverReport, Error> {
    let problem = PowerProblem::proposed(&channel.gains, params, &cfg.limits);
    solve_problem(&problem, cfg, None)
}

/// The log-power form of a report's final allocation.
pub fn final_log_powers(report: &SolverReport) -> LogPowerVector {
    LogPowerVector::from_powers(&report.final_powers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_effective_gains, drop_topology, TopologyConfig};
    use crate::problem::{Budget, Coupling, Link, RateFloor, Signal};

    fn instance(seed: u64, m: usize) -> (PowerProblem, SolverConfig) {
        let cfg = TopologyConfig { num_antennas: m, ..TopologyConfig::default() };
        let params = FadingParams::default();
        let topo = drop_topology(&cfg, seed).unwrap();
        let ch = build_effective_gains(&topo, &params, seed).unwrap();
        let solver = SolverConfig::default();
        (PowerProblem::proposed(&ch.gains, &params, &solver.limits), solver)
    }

    #[test]
    fn taylor_piece_is_tight_and_overestimates() {
        let (problem, _) = instance(2, 16);
        let relax = RelaxationState::tight_at(&problem, &problem.uniform_start(0.5)).unwrap();
        let xt = LogPowerVector::from_powers(&problem.uniform_start(0.2)).0;
        for c in 0..problem.couplings.len() {
            let lin = taylor_linearize_su(&problem, &relax, c, &xt);
            let exact = relaxed_link_expr(&problem, &relax, problem.couplings[c].access);
            assert!((lin.value(&xt) - exact.value(&xt)).abs() < 1e-12);
            for s in 0..50 {
                let x: Vec<f64> = xt.iter().enumerate().map(|(i, v)| v + 0.3 * ((i * 7 + s * 13) % 11) as f64 - 1.5).collect();
                assert!(lin.value(&x) >= exact.value(&x) - 1e-12);
            }
        }
    }

    #[test]
    fn proposed_instance_converges_feasibly() {
        let (problem, cfg) = instance(1, 16);
        let rep = solve_problem(&problem, &cfg, None).unwrap();
        for run in &rep.inner_runs {
            for w in run.relaxed_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8);
            }
            assert!(run.violations.iter().all(|&v| v <= FEAS_TOL));
        }
        for w in rep.outer_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        assert!(rep.objective > 0.0);
    }

    #[test]
    fn unreachable_backhaul_is_infeasible() {
        // the access link needs 2 bits while the backhaul link has no gain
        let problem = PowerProblem {
            num_vars: 2,
            links: vec![
                Link { signal: Signal::Fixed(1e-30), interferers: vec![], noise: 1e-13 },
                Link { signal: Signal::Var { var: 1, gain: 1e-6 }, interferers: vec![], noise: 1e-13 },
            ],
            weights: vec![0.0, 1.0],
            couplings: vec![Coupling { backhaul: 0, access: 1 }],
            budgets: vec![Budget { vars: vec![0], cap: 1.0 }, Budget { vars: vec![1], cap: 0.1 }],
            floors: vec![RateFloor { link: 1, min_rate: 2.0 }],
            sinr_gap: 3.5,
            p_floor: 1e-10,
        };
        let cfg = SolverConfig::default();
        assert!(matches!(solve_problem(&problem, &cfg, None), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn start_at_a_fixed_point_returns_after_one_solve() {
        // single link, monotone objective: the cap is the fixed point
        let problem = PowerProblem {
            num_vars: 1,
            links: vec![Link { signal: Signal::Var { var: 0, gain: 1e-9 }, interferers: vec![], noise: 1e-13 }],
            weights: vec![1.0],
            couplings: vec![],
            budgets: vec![Budget { vars: vec![0], cap: 10.0 }],
            floors: vec![],
            sinr_gap: 3.5,
            p_floor: 1e-10,
        };
        let cfg = SolverConfig::default();
        let rep = solve_problem(&problem, &cfg, None).unwrap();
        assert!((rep.final_powers[0] - 10.0).abs() < 1e-5);
        let x = LogPowerVector::from_powers(&rep.final_powers).0;
        let relax = RelaxationState::tight_at(&problem, &rep.final_powers).unwrap();
        let run = cccp_inner(&problem, &relax, &x, &cfg).unwrap();
        assert_eq!(run.iterations(), 1);
        assert!(run.converged);
    }
}
