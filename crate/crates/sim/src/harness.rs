//! Monte Carlo driver: droppings x sweep points x schemes.

use std::time::Instant;

use rayon::prelude::*;
use sbh_core::baselines::{run_scheme, SchemeId, SchemeOutcome};
use sbh_core::model::{build_effective_gains, drop_topology};
use sbh_core::seed;
use sbh_core::Error;

use crate::config::ScenarioConfig;

/// Termination label of rows whose solve returned an error other than
/// infeasibility.
pub const ERROR_TERMINATION: &str = "error";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: SchemeId,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub dropping: usize,
    pub total_se: f64,
    pub mu_se: f64,
    pub su_se: f64,
    pub backhaul_power_w: f64,
    pub iterations: usize,
    pub termination: String,
    pub wall_time_ms: f64,
}

impl ResultRow {
    /// Rows with a usable allocation (converged or stopped at a cap).
    pub fn succeeded(&self) -> bool {
        self.termination != "infeasible" && self.termination != ERROR_TERMINATION
    }
}

/// Seed of dropping `d`. It does not depend on the sweep value, so every
/// sweep point sees the same droppings.
pub fn dropping_seed(base: u64, d: usize) -> u64 {
    seed::derive(base, d as u64)
}

fn row_from(scheme: SchemeId, cfg: &ScenarioConfig, value: f64, d: usize, r: Result<SchemeOutcome, Error>, ms: f64) -> ResultRow {
    let mut row = ResultRow {
        scheme,
        sweep_param: cfg.sweep.name().to_string(),
        sweep_value: value,
        dropping: d,
        total_se: f64::NAN,
        mu_se: f64::NAN,
        su_se: f64::NAN,
        backhaul_power_w: f64::NAN,
        iterations: 0,
        termination: String::new(),
        wall_time_ms: if cfg.timing { ms } else { 0.0 },
    };
    match r {
        Ok(o) => {
            row.total_se = o.total_se;
            row.mu_se = o.mu_se;
            row.su_se = o.su_se;
            row.backhaul_power_w = o.backhaul_power;
            row.iterations = o.iterations;
            row.termination = o.termination.as_str().to_string();
        }
        Err(Error::Infeasible { .. }) => row.termination = "infeasible".to_string(),
        Err(_) => row.termination = ERROR_TERMINATION.to_string(),
    }
    row
}

/// Every scheme on one dropping at one sweep point.
pub fn run_dropping(cfg: &ScenarioConfig, value: f64, d: usize) -> Vec<ResultRow> {
    let (topo_cfg, fading) = cfg.at_sweep_value(value);
    let s = dropping_seed(cfg.seed, d);
    let channel = drop_topology(&topo_cfg, s).and_then(|t| build_effective_gains(&t, &fading, s));
    cfg.schemes
        .iter()
        .map(|&scheme| {
            let t0 = Instant::now();
            let r = match &channel {
                Ok(ch) => run_scheme(scheme, ch, &fading, &cfg.solver),
                Err(e) => Err(e.clone()),
            };
            row_from(scheme, cfg, value, d, r, t0.elapsed().as_secs_f64() * 1e3)
        })
        .collect()
}

/// Runs the whole scenario on `cfg.workers` threads. Rows come back sorted by
/// (scheme, sweep value index, dropping) whatever the scheduling.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Vec<ResultRow>, rayon::ThreadPoolBuildError> {
    let values = cfg.effective_sweep_values();
    let jobs: Vec<(usize, usize)> = (0..values.len()).flat_map(|v| (0..cfg.droppings).map(move |d| (v, d))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let per_job: Vec<Vec<ResultRow>> = pool.install(|| jobs.par_iter().map(|&(v, d)| run_dropping(cfg, values[v], d)).collect());

    let mut keyed: Vec<((usize, usize, usize), ResultRow)> = Vec::with_capacity(per_job.len() * cfg.schemes.len());
    for (&(v, d), rows) in jobs.iter().zip(per_job) {
        for (s, row) in rows.into_iter().enumerate() {
            keyed.push(((s, v, d), row));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// Mean and 95% normal-approximation half-width.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: SchemeId,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub rows: usize,
    pub succeeded: usize,
    /// Droppings on which every scheme of the run succeeded; the statistics
    /// below are over these only, so schemes are compared on the same drops.
    pub common: usize,
    pub total_se: (f64, f64),
    pub mu_se: (f64, f64),
    pub su_se: (f64, f64),
    pub backhaul_power_w: (f64, f64),
    pub mean_iterations: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut schemes: Vec<SchemeId> = rows.iter().map(|r| r.scheme).collect();
    schemes.sort();
    schemes.dedup();
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        if !values.iter().any(|v| v.to_bits() == r.sweep_value.to_bits()) {
            values.push(r.sweep_value);
        }
    }
    let mut out = Vec::new();
    for &scheme in &schemes {
        for &value in &values {
            let at_value: Vec<&ResultRow> = rows.iter().filter(|r| r.sweep_value.to_bits() == value.to_bits()).collect();
            let mine: Vec<&ResultRow> = at_value.iter().copied().filter(|r| r.scheme == scheme).collect();
            if mine.is_empty() {
                continue;
            }
            let common: Vec<&ResultRow> = mine
                .iter()
                .copied()
                .filter(|r| r.succeeded() && at_value.iter().filter(|o| o.dropping == r.dropping).all(|o| o.succeeded()))
                .collect();
            let stat = |f: fn(&ResultRow) -> f64| mean_ci(&common.iter().map(|r| f(r)).collect::<Vec<_>>());
            out.push(SummaryRow {
                scheme,
                sweep_param: mine[0].sweep_param.clone(),
                sweep_value: value,
                rows: mine.len(),
                succeeded: mine.iter().filter(|r| r.succeeded()).count(),
                common: common.len(),
                total_se: stat(|r| r.total_se),
                mu_se: stat(|r| r.mu_se),
                su_se: stat(|r| r.su_se),
                backhaul_power_w: stat(|r| r.backhaul_power_w),
                mean_iterations: stat(|r| r.iterations as f64).0,
            });
        }
    }
    out
}
