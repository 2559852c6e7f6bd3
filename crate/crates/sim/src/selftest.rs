//! The acceptance checks, runnable at full or reduced scale. The `acceptance`
//! test target runs them at full scale; `sbh selftest` defaults to the quick
//! profile.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbh_core::baselines::{bfs_oracle, grid_resolution_slack, GridSpec, SchemeId};
use sbh_core::cccp::{solve_problem, SolverConfig, SolverReport, Termination};
use sbh_core::model::{build_effective_gains, drop_topology, FadingParams, TopologyConfig};
use sbh_core::problem::{Layout, PowerProblem};
use sbh_core::rates::{check_constraints, PowerVector, FEAS_TOL};
use sbh_core::relaxation::{
    relaxed_link_gradient, relaxed_rate_bh, relaxed_rate_mu, relaxed_rate_su, scam_constants, RelaxationState, Z0_FLOOR,
};
use sbh_core::Error;

use crate::config::{ScenarioConfig, SweepAxis};
use crate::harness::{run_sweep, ResultRow};
use crate::output::write_results;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} criterion {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

/// Sample sizes of every check.
#[derive(Debug, Clone, PartialEq)]
pub struct Scale {
    pub scam_anchors: usize,
    pub scam_points: usize,
    pub sandwich_vectors: usize,
    pub gradient_points: usize,
    pub cccp_instances: usize,
    pub oracle_instances: usize,
    pub oracle_grid: usize,
    pub multistart_starts: usize,
    pub trend_droppings: usize,
    pub repro_droppings: usize,
    /// Worker threads for the Monte Carlo checks, `0` for one per core.
    pub workers: usize,
}

impl Scale {
    pub fn full() -> Self {
        Self {
            scam_anchors: 10_000,
            scam_points: 100,
            sandwich_vectors: 1000,
            gradient_points: 100,
            cccp_instances: 100,
            oracle_instances: 20,
            oracle_grid: 50,
            multistart_starts: 5,
            trend_droppings: 100,
            repro_droppings: 12,
            workers: 0,
        }
    }

    pub fn quick() -> Self {
        Self {
            scam_anchors: 1000,
            scam_points: 20,
            sandwich_vectors: 200,
            gradient_points: 20,
            cccp_instances: 20,
            oracle_instances: 4,
            oracle_grid: 30,
            multistart_starts: 5,
            trend_droppings: 20,
            repro_droppings: 4,
            workers: 0,
        }
    }
}

fn result(id: u8, name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult { id, name, passed, detail }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn proposed_instance(k: usize, n: usize, m: usize, seed: u64) -> Result<PowerProblem, Error> {
    let cfg = TopologyConfig { num_antennas: m, num_mus: k, num_sbs: n, ..TopologyConfig::default() };
    let params = FadingParams::default();
    let ch = build_effective_gains(&drop_topology(&cfg, seed)?, &params, seed)?;
    Ok(PowerProblem::proposed(&ch.gains, &params, &SolverConfig::default().limits))
}

pub fn scam_tightness(scale: &Scale) -> CriterionResult {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_tight, mut worst_bound) = (0.0_f64, f64::NEG_INFINITY);
    for _ in 0..scale.scam_anchors {
        let z0 = log_uniform(&mut rng, 1e-3, 1e3);
        let (a, mu) = scam_constants(z0).expect("positive anchor");
        worst_tight = worst_tight.max((a * z0.log2() + mu - (1.0 + z0).log2()).abs());
        for _ in 0..scale.scam_points {
            let z = log_uniform(&mut rng, 1e-6, 1e6);
            worst_bound = worst_bound.max(a * z.log2() + mu - (1.0 + z).log2());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let passed = worst_tight <= 1e-12 && worst_bound <= 1e-12 && secs < 1.0;
    result(1, "bound tightness", passed, format!("max |gap at anchor| {worst_tight:.2e}, max excess {worst_bound:.2e}, {secs:.3} s"))
}

/// Uniformly random powers inside every budget.
fn random_feasible_powers(problem: &PowerProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..problem.num_vars).map(|_| rng.random_range(0.0..1.0)).collect();
    for b in &problem.budgets {
        let total: f64 = b.vars.iter().map(|&v| p[v]).sum();
        let target = rng.random_range(0.0..1.0) * b.cap;
        if total > target {
            for &v in &b.vars {
                p[v] *= target / total;
            }
        }
    }
    p.iter().map(|v| v.max(problem.p_floor)).collect()
}

pub fn lower_bound_sandwich(scale: &Scale) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let instances = 10;
    let (mut worst_excess, mut worst_tight, mut clamped) = (f64::NEG_INFINITY, 0.0_f64, 0usize);
    for seed in 0..instances {
        let problem = proposed_instance(4, 4, 128, seed).expect("instance");
        for _ in 0..scale.sandwich_vectors.div_ceil(instances as usize) {
            let anchor = random_feasible_powers(&problem, &mut rng);
            let p = random_feasible_powers(&problem, &mut rng);
            let x: Vec<f64> = p.iter().map(|v| v.ln()).collect();
            let exact = problem.rates(&p);
            let old = RelaxationState::tight_at(&problem, &anchor).expect("anchors");
            let new = old.retighten(&problem.sinrs(&p), problem.sinr_gap).expect("anchors");
            for (l, &r) in exact.iter().enumerate() {
                let bar = sbh_core::relaxation::relaxed_link_rate(&problem, &old, l, &x);
                worst_excess = worst_excess.max(bar - r);
                if problem.links[l].sinr(&p) / problem.sinr_gap <= Z0_FLOOR {
                    clamped += 1;
                    continue;
                }
                let tight = sbh_core::relaxation::relaxed_link_rate(&problem, &new, l, &x);
                worst_tight = worst_tight.max((tight - r).abs());
            }
        }
    }
    let passed = worst_excess <= 1e-9 && worst_tight <= 1e-10;
    result(
        2,
        "lower-bound sandwich",
        passed,
        format!("max Rbar - R {worst_excess:.2e}, max |Rbar - R| after retighten {worst_tight:.2e}, {clamped} links below the anchor floor skipped"),
    )
}

type RateFn = fn(&PowerProblem, Layout, &RelaxationState, usize, &[f64]) -> f64;
type LinkOf = fn(&Layout, usize) -> usize;

pub fn gradient_check(scale: &Scale) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for i in 0..scale.gradient_points {
        let problem = proposed_instance(4, 4, 16, i as u64 % 10).expect("instance");
        let layout = problem.layout_if_proposed().expect("proposed layout");
        let anchor = random_feasible_powers(&problem, &mut rng);
        let relax = RelaxationState::tight_at(&problem, &anchor).expect("anchors");
        let x: Vec<f64> = random_feasible_powers(&problem, &mut rng).iter().map(|v| v.ln()).collect();
        let families: [(RateFn, LinkOf, usize); 3] = [
            (relaxed_rate_mu, |l, k| l.mu(k), layout.num_mus),
            (relaxed_rate_bh, |l, n| l.bh(n), layout.num_sbs),
            (relaxed_rate_su, |l, n| l.su(n), layout.num_sbs),
        ];
        for (rate, link_of, count) in families {
            for j in 0..count {
                let g = relaxed_link_gradient(&problem, &relax, link_of(&layout, j), &x);
                for v in 0..x.len() {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[v] += 1e-6;
                    xm[v] -= 1e-6;
                    let fd = (rate(&problem, layout, &relax, j, &xp) - rate(&problem, layout, &relax, j, &xm)) / 2e-6;
                    worst = worst.max((fd - g[v]).abs() / g[v].abs().max(1.0));
                }
            }
        }
    }
    result(
        3,
        "gradient correctness",
        worst <= 1e-4,
        format!("max relative error {worst:.2e} (relative to max(|g|, 1)) over {} points", scale.gradient_points),
    )
}

/// Solver runs shared by criteria 4, 5 and 9.
pub struct CccpRuns {
    pub reports: Vec<(u64, Result<SolverReport, Error>)>,
    pub seconds: f64,
}

pub fn cccp_runs(scale: &Scale) -> CccpRuns {
    let t0 = Instant::now();
    let cfg = SolverConfig::default();
    let reports = (0..scale.cccp_instances as u64)
        .map(|seed| (seed, proposed_instance(4, 4, 16, seed).and_then(|p| solve_problem(&p, &cfg, None))))
        .collect();
    CccpRuns { reports, seconds: t0.elapsed().as_secs_f64() }
}

pub fn cccp_monotone_feasible(runs: &CccpRuns) -> CriterionResult {
    let mut solved = 0;
    let mut infeasible = 0;
    let mut other_errors = 0;
    let (mut worst_drop, mut worst_violation) = (0.0_f64, 0.0_f64);
    for (_, r) in &runs.reports {
        match r {
            Ok(rep) => {
                solved += 1;
                for run in &rep.inner_runs {
                    for w in run.relaxed_trace.windows(2) {
                        worst_drop = worst_drop.max(w[0] - w[1]);
                    }
                    worst_violation = run.violations.iter().fold(worst_violation, |m, &v| m.max(v));
                }
            }
            Err(Error::Infeasible { .. }) => infeasible += 1,
            Err(_) => other_errors += 1,
        }
    }
    let passed = worst_drop <= 1e-8 && worst_violation <= FEAS_TOL && other_errors == 0 && runs.seconds < 300.0;
    result(
        4,
        "CCCP monotonicity and feasibility",
        passed,
        format!(
            "{solved} solved, {infeasible} infeasible, {other_errors} errors; max trace drop {worst_drop:.2e}, max violation {:.2e}, {:.1} s",
            worst_violation.max(0.0),
            runs.seconds
        ),
    )
}

pub fn coupling_activity(runs: &CccpRuns) -> CriterionResult {
    let converged: Vec<&SolverReport> =
        runs.reports.iter().filter_map(|(_, r)| r.as_ref().ok()).filter(|r| r.termination == Termination::Converged).collect();
    let active = converged.iter().filter(|r| r.c1_activity.iter().all(|&a| a <= 1e-3)).count();
    let share = if converged.is_empty() { 0.0 } else { active as f64 / converged.len() as f64 };
    let median_gap = {
        let mut gaps: Vec<f64> = converged.iter().map(|r| r.c1_activity.iter().fold(0.0_f64, |m, &a| m.max(a))).collect();
        gaps.sort_by(f64::total_cmp);
        gaps.get(gaps.len() / 2).copied().unwrap_or(f64::NAN)
    };
    result(
        5,
        "coupling activity at convergence",
        !converged.is_empty() && share >= 0.95,
        format!(
            "{active}/{} converged instances with every gap <= 1e-3 ({:.0}%), median max gap {median_gap:.3}",
            converged.len(),
            100.0 * share
        ),
    )
}

pub fn convergence_budget(runs: &CccpRuns) -> CriterionResult {
    let cap = SolverConfig::default().t2_max;
    let solved: Vec<&SolverReport> = runs.reports.iter().filter_map(|(_, r)| r.as_ref().ok()).collect();
    let within =
        solved.iter().filter(|r| r.termination == Termination::Converged && r.inner_runs.iter().all(|i| i.iterations() <= cap)).count();
    let longest = solved.iter().flat_map(|r| r.inner_runs.iter().map(|i| i.iterations())).max().unwrap_or(0);
    let share = if solved.is_empty() { 0.0 } else { within as f64 / solved.len() as f64 };
    result(
        9,
        "convergence budget",
        !solved.is_empty() && share >= 0.95,
        format!("{within}/{} feasible runs converged with inner runs <= {cap} iterations, longest inner run {longest}", solved.len()),
    )
}

pub fn oracle_gap(scale: &Scale) -> CriterionResult {
    let t0 = Instant::now();
    let cfg = SolverConfig::default();
    let grid = GridSpec::new(scale.oracle_grid);
    let (mut ok, mut both_infeasible, mut failures) = (0, 0, Vec::new());
    let (mut worst_ratio, mut worst_excess) = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..scale.oracle_instances as u64 {
        let problem = proposed_instance(1, 1, 8, seed).expect("instance");
        let cccp = solve_problem(&problem, &cfg, None);
        let bfs = bfs_oracle(&problem, &grid);
        match (&cccp, &bfs) {
            (Ok(c), Ok((p, b))) => {
                let slack = grid_resolution_slack(&problem, &grid, 200, seed).unwrap_or(f64::INFINITY);
                let pv = PowerVector::from_flat(1, 1, p).expect("layout");
                let independent = check_constraints(&pv, &channel_gains(seed), &FadingParams::default(), &cfg.limits);
                let ratio = c.objective / b;
                let excess = c.objective - slack - b;
                worst_ratio = worst_ratio.min(ratio);
                worst_excess = worst_excess.max(excess);
                if ratio >= 0.95 && excess <= 0.0 && independent.is_feasible(FEAS_TOL) {
                    ok += 1;
                } else {
                    failures.push(seed);
                }
            }
            (Err(Error::Infeasible { .. }), Err(Error::NoFeasibleGridPoint)) => both_infeasible += 1,
            _ => failures.push(seed),
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    result(
        6,
        "oracle gap",
        failures.is_empty() && ok > 0 && secs < 120.0,
        format!(
            "{ok} agree, {both_infeasible} infeasible for both, failures {failures:?}; min CCCP/BFS {worst_ratio:.4}, max (CCCP - slack - BFS) {worst_excess:.3e}, {secs:.1} s"
        ),
    )
}

fn channel_gains(seed: u64) -> sbh_core::model::EffectiveGains {
    let cfg = TopologyConfig { num_antennas: 8, num_mus: 1, num_sbs: 1, ..TopologyConfig::default() };
    let params = FadingParams::default();
    build_effective_gains(&drop_topology(&cfg, seed).expect("topology"), &params, seed).expect("channel").gains
}

pub fn multistart(scale: &Scale) -> CriterionResult {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // the first seeded K=N=4 drop with a feasible problem
    let Some((seed, problem)) =
        (0..50u64).filter_map(|s| proposed_instance(4, 4, 128, s).ok().map(|p| (s, p))).find(|(_, p)| solve_problem(p, &cfg, None).is_ok())
    else {
        return result(7, "multi-start robustness", false, "no feasible instance among 50 drops".into());
    };
    let mut objectives = Vec::new();
    let mut errors = 0;
    for _ in 0..scale.multistart_starts {
        let start = random_feasible_powers(&problem, &mut rng);
        match solve_problem(&problem, &cfg, Some(&start)) {
            Ok(r) => objectives.push(r.objective),
            Err(_) => errors += 1,
        }
    }
    let hi = objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = objectives.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / hi.abs();
    result(
        7,
        "multi-start robustness",
        errors == 0 && objectives.len() == scale.multistart_starts && spread <= 0.01,
        format!("drop seed {seed}: objectives {lo:.4}..{hi:.4}, spread {:.3}%, {errors} failed starts", 100.0 * spread),
    )
}

/// Mean total SE per key over the droppings on which every key succeeded.
fn common_means<K: PartialEq + Copy>(rows: &[ResultRow], keys: &[K], key: impl Fn(&ResultRow) -> K) -> (Vec<f64>, usize) {
    let droppings: Vec<usize> = {
        let mut d: Vec<usize> = rows.iter().map(|r| r.dropping).collect();
        d.sort();
        d.dedup();
        d
    };
    let common: Vec<usize> = droppings
        .into_iter()
        .filter(|&d| keys.iter().all(|&k| rows.iter().any(|r| r.dropping == d && key(r) == k && r.succeeded())))
        .collect();
    let means = keys
        .iter()
        .map(|&k| {
            let v: Vec<f64> = rows.iter().filter(|r| key(r) == k && common.contains(&r.dropping)).map(|r| r.total_se).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    (means, common.len())
}

pub fn trends(scale: &Scale) -> CriterionResult {
    let t0 = Instant::now();
    let base = ScenarioConfig {
        droppings: scale.trend_droppings,
        workers: scale.workers,
        schemes: vec![SchemeId::ProposedFdMassiveMimo, SchemeId::HdMassiveMimo, SchemeId::FdNoMassiveMimo],
        ..ScenarioConfig::default()
    };
    let rows = run_sweep(&base).expect("thread pool");
    let (m, common) = common_means(&rows, &base.schemes, |r| r.scheme);
    // Differences inside the outer-loop tolerance are ties, not an ordering.
    let tol = SolverConfig::default().eps1;
    let ordered = m[0] > m[1] + tol && m[1] > m[2] + tol;

    let gammas = vec![1e-9, 1e-7, 1e-5, 1e-3];
    let sweep = ScenarioConfig {
        sweep: SweepAxis::GammaSi,
        sweep_values: gammas.clone(),
        schemes: vec![SchemeId::ProposedFdMassiveMimo],
        ..base.clone()
    };
    let rows = run_sweep(&sweep).expect("thread pool");
    let keys: Vec<u64> = gammas.iter().map(|g| g.to_bits()).collect();
    let (g, g_common) = common_means(&rows, &keys, |r| r.sweep_value.to_bits());
    let nonincreasing = g.windows(2).all(|w| w[1] <= w[0] + tol);
    let secs = t0.elapsed().as_secs_f64();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" / ");
    result(
        8,
        "trend reproduction",
        ordered && nonincreasing && secs < 1800.0,
        format!(
            "proposed / hd / fd_no over {common} common drops: {} ({}); proposed over gamma 1e-9..1e-3 on {g_common} drops: {} ({}); {secs:.0} s",
            fmt(&m),
            if ordered { "ordered" } else { "not strictly ordered beyond the solver tolerance" },
            fmt(&g),
            if nonincreasing { "nonincreasing" } else { "increasing somewhere" },
        ),
    )
}

pub fn reproducibility(scale: &Scale) -> CriterionResult {
    let mut cfg = ScenarioConfig { droppings: scale.repro_droppings, ..ScenarioConfig::default() };
    cfg.topology = TopologyConfig { num_antennas: 16, num_mus: 2, num_sbs: 2, ..TopologyConfig::default() };
    cfg.sweep = SweepAxis::GammaSi;
    cfg.sweep_values = vec![1e-7, 1e-3];
    let bytes = |workers: usize| {
        let rows = run_sweep(&ScenarioConfig { workers, ..cfg.clone() }).expect("thread pool");
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).expect("in-memory write");
        buf
    };
    let reference = bytes(1);
    let same = [1, 2, 4, 7].iter().all(|&w| bytes(w) == reference);
    result(10, "reproducibility", same, format!("results.csv identical for 1 (twice), 2, 4 and 7 workers ({} bytes)", reference.len()))
}

/// Every criterion in order.
pub fn run_all(scale: &Scale, mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    let mut push = |r: CriterionResult| {
        report(&r);
        out.push(r);
    };
    push(scam_tightness(scale));
    push(lower_bound_sandwich(scale));
    push(gradient_check(scale));
    let runs = cccp_runs(scale);
    push(cccp_monotone_feasible(&runs));
    push(coupling_activity(&runs));
    push(oracle_gap(scale));
    push(multistart(scale));
    push(trends(scale));
    push(convergence_budget(&runs));
    push(reproducibility(scale));
    out
}
