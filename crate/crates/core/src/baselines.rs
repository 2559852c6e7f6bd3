//! Comparison schemes and a brute-force grid oracle.
//!
//! The schemes besides the proposed one are modeled as follows.
//!
//! * Half duplex with massive MIMO: the proposed problem with no
//!   self-interference (an SBS never transmits while it receives), and access
//!   and backhaul each active half of the time. The optimizer sees the access
//!   rates at weight 1/2; reported SU and backhaul rates are halved.
//! * Wired backhaul without massive MIMO: the MBS serves one MU per slot from a
//!   single antenna at full power, and the backhaul is a cable. Only the SBS
//!   access powers are optimized; SUs see full-power MBS interference.
//! * Full duplex without massive MIMO: a band fraction `eta` carries the MUs
//!   (one per slot, single antenna); the rest carries the backhaul (one SBS per
//!   slot) and, on the same band, the SBS access links. The MBS spreads its
//!   power evenly over the band. An SU gets the smaller of its access and
//!   backhaul throughput. `eta` and a common SBS power are chosen by grid
//!   search.

use alloc::vec;
use alloc::vec::Vec;

use crate::cccp::{solve_problem, SolverConfig, SolverReport, Termination};
use crate::math::{exp, ln, log2_1p};
use crate::model::{ChannelRealization, FadingParams};
use crate::problem::{Budget, Layout, Link, PowerProblem, RateFloor, Signal};
use crate::rates::FEAS_TOL;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    ProposedFdMassiveMimo,
    HdMassiveMimo,
    FdNoMassiveMimo,
    WiredNoMassiveMimo,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] =
        [SchemeId::ProposedFdMassiveMimo, SchemeId::HdMassiveMimo, SchemeId::FdNoMassiveMimo, SchemeId::WiredNoMassiveMimo];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::ProposedFdMassiveMimo => "proposed_fd_mmimo",
            SchemeId::HdMassiveMimo => "hd_mmimo",
            SchemeId::FdNoMassiveMimo => "fd_no_mmimo",
            SchemeId::WiredNoMassiveMimo => "wired_no_mmimo",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Per-scheme result for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub mu_rates: Vec<f64>,
    pub su_rates: Vec<f64>,
    pub total_se: f64,
    pub mu_se: f64,
    pub su_se: f64,
    /// Sum of the MBS power spent on backhaul, watts.
    pub backhaul_power: f64,
    /// Inner solver iterations (zero for the grid-searched scheme).
    pub iterations: usize,
    pub termination: Termination,
}

impl SchemeOutcome {
    fn new(mu_rates: Vec<f64>, su_rates: Vec<f64>, backhaul_power: f64, iterations: usize, termination: Termination) -> Self {
        let mu_se: f64 = mu_rates.iter().sum();
        let su_se: f64 = su_rates.iter().sum();
        Self { total_se: mu_se + su_se, mu_rates, su_rates, mu_se, su_se, backhaul_power, iterations, termination }
    }
}

pub fn run_scheme(
    scheme: SchemeId,
    channel: &ChannelRealization,
    params: &FadingParams,
    cfg: &SolverConfig,
) -> Result<SchemeOutcome, Error> {
    match scheme {
        SchemeId::ProposedFdMassiveMimo => {
            let problem = PowerProblem::proposed(&channel.gains, params, &cfg.limits);
            let report = solve_problem(&problem, cfg, None)?;
            Ok(massive_mimo_outcome(&problem, &report, 1.0))
        }
        SchemeId::HdMassiveMimo => {
            let hd = FadingParams { gamma_si: 0.0, ..params.clone() };
            let mut problem = PowerProblem::proposed(&channel.gains, &hd, &cfg.limits);
            let layout = layout_of(&problem);
            for s in 0..layout.num_sbs {
                problem.weights[layout.su(s)] = 0.5;
            }
            let report = solve_problem(&problem, cfg, None)?;
            Ok(massive_mimo_outcome(&problem, &report, 0.5))
        }
        SchemeId::WiredNoMassiveMimo => wired(channel, params, cfg),
        SchemeId::FdNoMassiveMimo => fd_no_massive_mimo(channel, params, cfg),
    }
}

fn layout_of(problem: &PowerProblem) -> Layout {
    problem.layout_if_proposed().expect("proposed problem layout")
}

fn massive_mimo_outcome(problem: &PowerProblem, report: &SolverReport, duplex_share: f64) -> SchemeOutcome {
    let layout = layout_of(problem);
    let rates = &report.final_rates;
    let mu = (0..layout.num_mus).map(|k| rates[layout.mu(k)]).collect();
    let su = (0..layout.num_sbs).map(|s| duplex_share * rates[layout.su(s)]).collect();
    let bh_power = (0..layout.num_sbs).map(|s| report.final_powers[layout.bh(s)]).sum();
    SchemeOutcome::new(mu, su, bh_power, report.inner_iterations(), report.termination)
}

/// `beta |h|^2` of the first MBS antenna towards channel row `row`.
fn single_antenna_gain(channel: &ChannelRealization, row: usize, beta: f64) -> f64 {
    beta * channel.h_mbs.get(row, 0).norm_sqr()
}

fn wired(channel: &ChannelRealization, params: &FadingParams, cfg: &SolverConfig) -> Result<SchemeOutcome, Error> {
    let g = &channel.gains;
    let (k, n) = (g.num_mus(), g.num_sbs());
    let p_mbs = cfg.limits.p_mbs_max;
    let noise = params.noise_power;
    let mut links = Vec::with_capacity(k + n);
    for mu in 0..k {
        let signal = Signal::Fixed(p_mbs * single_antenna_gain(channel, mu, channel.beta_mu[mu]));
        let interferers = (0..n).map(|s| (s, g.c_sbs_mu[s][mu])).filter(|&(_, c)| c > 0.0).collect();
        links.push(Link { signal, interferers, noise });
    }
    for u in 0..n {
        let mbs = p_mbs * single_antenna_gain(channel, k + n + u, channel.beta_mbs_su[u]);
        let interferers = (0..n).filter(|&s| s != u).map(|s| (s, g.c_sbs_su[s][u])).filter(|&(_, c)| c > 0.0).collect();
        links.push(Link { signal: Signal::Var { var: u, gain: g.a_su[u] }, interferers, noise: noise + mbs });
    }
    let mut weights = vec![1.0 / k as f64; k];
    weights.extend(vec![1.0; n]);
    let floors = if cfg.limits.r_min_su > 0.0 {
        (0..n).map(|u| RateFloor { link: k + u, min_rate: cfg.limits.r_min_su }).collect()
    } else {
        Vec::new()
    };
    let problem = PowerProblem {
        num_vars: n,
        links,
        weights,
        couplings: Vec::new(),
        budgets: (0..n).map(|s| Budget { vars: vec![s], cap: cfg.limits.p_sbs_max }).collect(),
        floors,
        sinr_gap: params.sinr_gap,
        p_floor: crate::rates::P_FLOOR,
    };
    if n == 0 {
        let mu = (0..k).map(|mu| problem.link_rate(mu, &[]) / k as f64).collect();
        return Ok(SchemeOutcome::new(mu, Vec::new(), 0.0, 0, Termination::Converged));
    }
    let report = solve_problem(&problem, cfg, None)?;
    let mu = (0..k).map(|mu| report.final_rates[mu] / k as f64).collect();
    let su = (0..n).map(|u| report.final_rates[k + u]).collect();
    Ok(SchemeOutcome::new(mu, su, 0.0, report.inner_iterations(), report.termination))
}

/// Band fractions tried for the MU share.
const ETA_STEPS: usize = 99;
/// Common SBS power levels tried, log-spaced down to `1e-4` of the cap.
const SBS_POWER_STEPS: usize = 21;

fn fd_no_massive_mimo(channel: &ChannelRealization, params: &FadingParams, cfg: &SolverConfig) -> Result<SchemeOutcome, Error> {
    let g = &channel.gains;
    let (k, n) = (g.num_mus(), g.num_sbs());
    let p_mbs = cfg.limits.p_mbs_max;
    let gap = params.sinr_gap;
    let rate = |sinr: f64| log2_1p(sinr / gap);
    // Same power spectral density as a full-band transmission at full power.
    let mu_full: Vec<f64> =
        (0..k).map(|mu| rate(p_mbs * single_antenna_gain(channel, mu, channel.beta_mu[mu]) / params.noise_power)).collect();
    let bh_gain: Vec<f64> = (0..n).map(|s| single_antenna_gain(channel, k + s, channel.beta_bh[s])).collect();
    let mbs_su: Vec<f64> = (0..n).map(|u| single_antenna_gain(channel, k + n + u, channel.beta_mbs_su[u])).collect();

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
    for i in 1..=ETA_STEPS {
        let eta = i as f64 / (ETA_STEPS + 1) as f64;
        let rest = 1.0 - eta;
        let mu: Vec<f64> = mu_full.iter().map(|r| eta * r / k as f64).collect();
        let mu_sum: f64 = mu.iter().sum();
        // In-band totals: MBS power rest * p_mbs, noise rest * sigma^2.
        let noise = rest * params.noise_power;
        let p_bh = rest * p_mbs;
        for j in 0..SBS_POWER_STEPS {
            let p_s = cfg.limits.p_sbs_max * exp(-(j as f64) * ln(1e4) / (SBS_POWER_STEPS - 1) as f64);
            let mut su = Vec::with_capacity(n);
            for u in 0..n {
                let cross_su: f64 = (0..n).filter(|&s| s != u).map(|s| g.c_sbs_su[s][u] * p_s).sum();
                let access = rate(g.a_su[u] * p_s / (cross_su + mbs_su[u] * p_bh + noise));
                let cross_bh: f64 = (0..n).filter(|&s| s != u).map(|s| g.c_sbs_sbs[s][u] * p_s).sum();
                let backhaul = rate(bh_gain[u] * p_bh / (cross_bh + params.gamma_si * p_s + noise));
                su.push(rest * access.min(backhaul / n as f64));
            }
            let total = mu_sum + su.iter().sum::<f64>();
            if best.as_ref().is_none_or(|b| total > b.0) {
                best = Some((total, mu.clone(), su, p_bh));
            }
        }
    }
    let (_, mu, su, p_bh) = best.expect("non-empty search grid");
    Ok(SchemeOutcome::new(mu, su, if n > 0 { p_bh } else { 0.0 }, 0, Termination::Converged))
}

/// Log-spaced search grid. Axis bounds default to `[p_floor, cap]` with the
/// cap taken from the tightest budget of each variable.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub min: Option<Vec<f64>>,
    pub max: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn new(points_per_axis: usize) -> Self {
        Self { points_per_axis, min: None, max: None }
    }

    /// Per-axis grid values.
    pub fn axes(&self, problem: &PowerProblem) -> Result<Vec<Vec<f64>>, Error> {
        let n = problem.num_vars;
        let lo = self.min.clone().unwrap_or_else(|| vec![problem.p_floor; n]);
        let hi = self.max.clone().unwrap_or_else(|| problem.upper_bounds());
        if lo.len() != n || hi.len() != n {
            return Err(Error::Dimension { expected: n, got: lo.len().min(hi.len()) });
        }
        if self.points_per_axis < 2 || lo.iter().zip(&hi).any(|(a, b)| !(*a > 0.0 && b > a)) {
            return Err(Error::InvalidConfig("grid needs two points per axis and 0 < min < max"));
        }
        let m = self.points_per_axis;
        Ok(lo
            .iter()
            .zip(&hi)
            .map(|(&a, &b)| {
                let mut axis: Vec<f64> = (0..m).map(|i| exp(ln(a) + (ln(b) - ln(a)) * i as f64 / (m - 1) as f64)).collect();
                // pin the ends so the caps themselves are on the grid
                axis[0] = a;
                axis[m - 1] = b;
                axis
            })
            .collect())
    }

    /// Spacing of each axis in log power.
    pub fn log_spacing(&self, problem: &PowerProblem) -> Result<Vec<f64>, Error> {
        Ok(self.axes(problem)?.iter().map(|a| ln(a[1]) - ln(a[0])).collect())
    }
}

pub const GRID_POINT_LIMIT: u128 = 100_000_000;

/// Exhaustive search over the grid for the best point feasible for the
/// original constraints.
pub fn bfs_oracle(problem: &PowerProblem, grid: &GridSpec) -> Result<(Vec<f64>, f64), Error> {
    let axes = grid.axes(problem)?;
    let points = (grid.points_per_axis as u128).checked_pow(axes.len() as u32).unwrap_or(u128::MAX);
    if points > GRID_POINT_LIMIT {
        return Err(Error::GridTooLarge { points, limit: GRID_POINT_LIMIT });
    }
    let n = axes.len();
    let mut idx = vec![0usize; n];
    let mut p: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    loop {
        if problem.residuals(&p).max_violation() <= FEAS_TOL {
            let v = problem.objective(&p);
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((p.clone(), v));
            }
        }
        // odometer increment
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < grid.points_per_axis {
                p[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            p[d] = axes[d][0];
            d += 1;
        }
        if d == n {
            break;
        }
    }
    best.ok_or(Error::NoFeasibleGridPoint)
}

/// Bound on how much the objective can exceed the best grid value inside one
/// grid cell: `sum_i L_i dx_i / 2`, with `L_i` the largest sampled partial of
/// the objective in log power and `dx_i` the axis spacing.
pub fn grid_resolution_slack(problem: &PowerProblem, grid: &GridSpec, samples: usize, seed: u64) -> Result<f64, Error> {
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    let axes = grid.axes(problem)?;
    let spacing = grid.log_spacing(problem)?;
    let n = axes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lipschitz = vec![0.0_f64; n];
    let h = 1e-6;
    for _ in 0..samples {
        let x: Vec<f64> = axes
            .iter()
            .map(|a| {
                let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                ln(a[0]) + u * (ln(a[a.len() - 1]) - ln(a[0]))
            })
            .collect();
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let f = |x: &[f64]| problem.objective(&x.iter().map(|&v| exp(v)).collect::<Vec<_>>());
            let d = (f(&xp) - f(&xm)) / (2.0 * h);
            lipschitz[i] = lipschitz[i].max(d.abs());
        }
    }
    Ok(lipschitz.iter().zip(&spacing).map(|(l, dx)| l * dx / 2.0).sum())
}
