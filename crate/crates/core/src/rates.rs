//! Exact SINR, rate and constraint evaluation of the unrelaxed problem.

use alloc::vec::Vec;

use crate::math::{dbm_to_watts, ln, log2_1p};
use crate::model::{EffectiveGains, FadingParams};
use crate::Error;

/// Smallest representable transmit power; "off" is represented by this value.
pub const P_FLOOR: f64 = 1e-10;

/// Default absolute tolerance for constraint checks.
pub const FEAS_TOL: f64 = 1e-8;

/// Transmit powers in watts: MBS streams to MUs, MBS backhaul streams, SBS
/// access transmissions.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector {
    pub p_mu: Vec<f64>,
    pub p_bh: Vec<f64>,
    pub p_sbs: Vec<f64>,
}

impl PowerVector {
    /// Builds a power vector, clamping entries below [`P_FLOOR`].
    pub fn new(p_mu: Vec<f64>, p_bh: Vec<f64>, p_sbs: Vec<f64>) -> Result<Self, Error> {
        if p_bh.len() != p_sbs.len() {
            return Err(Error::Dimension { expected: p_bh.len(), got: p_sbs.len() });
        }
        let mut p = Self { p_mu, p_bh, p_sbs };
        for v in p.iter_mut() {
            if !v.is_finite() {
                return Err(Error::NonFinite("transmit power"));
            }
            *v = v.max(P_FLOOR);
        }
        Ok(p)
    }

    /// Every MBS stream gets `mbs_total / (K + N)`, every SBS `sbs_each`.
    pub fn uniform(k: usize, n: usize, mbs_total: f64, sbs_each: f64) -> Self {
        let per_stream = mbs_total / (k + n).max(1) as f64;
        Self {
            p_mu: alloc::vec![per_stream.max(P_FLOOR); k],
            p_bh: alloc::vec![per_stream.max(P_FLOOR); n],
            p_sbs: alloc::vec![sbs_each.max(P_FLOOR); n],
        }
    }

    pub fn num_mus(&self) -> usize {
        self.p_mu.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.p_sbs.len()
    }

    /// `[p_mu | p_bh | p_sbs]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.p_mu.iter().chain(&self.p_bh).chain(&self.p_sbs).copied().collect()
    }

    pub fn from_flat(k: usize, n: usize, flat: &[f64]) -> Result<Self, Error> {
        if flat.len() != k + 2 * n {
            return Err(Error::Dimension { expected: k + 2 * n, got: flat.len() });
        }
        Self::new(flat[..k].to_vec(), flat[k..k + n].to_vec(), flat[k + n..].to_vec())
    }

    /// Natural-log powers in the same layout.
    pub fn to_log(&self) -> Vec<f64> {
        self.to_flat().into_iter().map(ln).collect()
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.p_mu.iter_mut().chain(self.p_bh.iter_mut()).chain(self.p_sbs.iter_mut())
    }
}

/// Power budgets and QoS floors.
#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    /// Total MBS transmit power across all streams, watts.
    pub p_mbs_max: f64,
    /// Per-SBS transmit power, watts.
    pub p_sbs_max: f64,
    /// Rate floor of every MU, bits/s/Hz.
    pub r_min_mu: f64,
    /// Rate floor of every SU, bits/s/Hz. Off by default: with the default
    /// drop geometry a 2 bit/s/Hz floor on every SU next to the MU floors is
    /// infeasible on almost every drop.
    pub r_min_su: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { p_mbs_max: dbm_to_watts(46.0), p_sbs_max: dbm_to_watts(20.0), r_min_mu: 2.0, r_min_su: 0.0 }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.p_mbs_max > P_FLOOR) || !(self.p_sbs_max > P_FLOOR) {
            return Err(Error::InvalidConfig("power budgets must exceed the power floor"));
        }
        if !(self.r_min_mu >= 0.0) || !(self.r_min_su >= 0.0) {
            return Err(Error::InvalidConfig("rate floors must be non-negative"));
        }
        if !self.p_mbs_max.is_finite() || !self.p_sbs_max.is_finite() || !self.r_min_mu.is_finite() || !self.r_min_su.is_finite() {
            return Err(Error::NonFinite("limits"));
        }
        Ok(())
    }
}

/// SINR of MU `k`.
pub fn sinr_mu(k: usize, p: &PowerVector, g: &EffectiveGains, params: &FadingParams) -> f64 {
    let interference: f64 = p.p_sbs.iter().zip(&g.c_sbs_mu).map(|(ps, row)| ps * row[k]).sum();
    p.p_mu[k] * g.a_mu[k] / (interference + params.noise_power)
}

/// SINR at the backhaul receiver of SBS `n`, including its own residual
/// self-interference.
pub fn sinr_bh(n: usize, p: &PowerVector, g: &EffectiveGains, params: &FadingParams) -> f64 {
    let intra: f64 = (0..p.num_sbs()).filter(|&j| j != n).map(|j| p.p_sbs[j] * g.c_sbs_sbs[j][n]).sum();
    p.p_bh[n] * g.a_bh[n] / (intra + params.gamma_si * p.p_sbs[n] + params.noise_power)
}

/// SINR of the user of SBS `n`.
pub fn sinr_su(n: usize, p: &PowerVector, g: &EffectiveGains, params: &FadingParams) -> f64 {
    let inter_mu: f64 = p.p_mu.iter().zip(&g.c_mbs_su_mu).map(|(pm, row)| pm * row[n]).sum();
    let inter_bh: f64 = p.p_bh.iter().zip(&g.c_mbs_su_bh).map(|(pb, row)| pb * row[n]).sum();
    let intra: f64 = (0..p.num_sbs()).filter(|&j| j != n).map(|j| p.p_sbs[j] * g.c_sbs_su[j][n]).sum();
    p.p_sbs[n] * g.a_su[n] / (inter_mu + inter_bh + intra + params.noise_power)
}

/// `log2(1 + sinr / omega)`.
pub fn rate(sinr: f64, params: &FadingParams) -> f64 {
    log2_1p(sinr / params.sinr_gap)
}

/// Per-link rates. `total` sums MU and SU rates only; backhaul rates are
/// capacity couplers.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTriple {
    pub r_mu: Vec<f64>,
    pub r_bh: Vec<f64>,
    pub r_su: Vec<f64>,
    pub total: f64,
}

impl RateTriple {
    pub fn from_parts(r_mu: Vec<f64>, r_bh: Vec<f64>, r_su: Vec<f64>) -> Self {
        let total = r_mu.iter().sum::<f64>() + r_su.iter().sum::<f64>();
        Self { r_mu, r_bh, r_su, total }
    }

    pub fn mu_sum(&self) -> f64 {
        self.r_mu.iter().sum()
    }

    pub fn su_sum(&self) -> f64 {
        self.r_su.iter().sum()
    }
}

pub fn objective(p: &PowerVector, g: &EffectiveGains, params: &FadingParams) -> RateTriple {
    let r_mu = (0..p.num_mus()).map(|k| rate(sinr_mu(k, p, g, params), params)).collect();
    let r_bh = (0..p.num_sbs()).map(|n| rate(sinr_bh(n, p, g, params), params)).collect();
    let r_su = (0..p.num_sbs()).map(|n| rate(sinr_su(n, p, g, params), params)).collect();
    RateTriple::from_parts(r_mu, r_bh, r_su)
}

/// Signed residuals of the original constraint set; non-negative means
/// satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// Backhaul rate minus access rate, per SBS.
    pub backhaul_margin: Vec<f64>,
    /// Unused MBS power budget, watts.
    pub mbs_budget: f64,
    /// Unused SBS power budget, watts, per SBS.
    pub sbs_budget: Vec<f64>,
    /// MU rate above its floor.
    pub mu_floor: Vec<f64>,
    /// SU rate above its floor.
    pub su_floor: Vec<f64>,
    pub feasible: bool,
}

impl ConstraintReport {
    /// Largest constraint violation (zero when everything holds).
    pub fn max_violation(&self) -> f64 {
        let worst = self
            .backhaul_margin
            .iter()
            .chain(&self.sbs_budget)
            .chain(&self.mu_floor)
            .chain(&self.su_floor)
            .copied()
            .fold(self.mbs_budget, f64::min);
        (-worst).max(0.0)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

pub fn check_constraints(p: &PowerVector, g: &EffectiveGains, params: &FadingParams, limits: &Limits) -> ConstraintReport {
    let rates = objective(p, g, params);
    let backhaul_margin = rates.r_bh.iter().zip(&rates.r_su).map(|(b, s)| b - s).collect();
    let mbs_budget = limits.p_mbs_max - p.p_mu.iter().sum::<f64>() - p.p_bh.iter().sum::<f64>();
    let sbs_budget = p.p_sbs.iter().map(|ps| limits.p_sbs_max - ps).collect();
    let mu_floor = rates.r_mu.iter().map(|r| r - limits.r_min_mu).collect();
    let su_floor = rates.r_su.iter().map(|r| r - limits.r_min_su).collect();
    let mut report = ConstraintReport { backhaul_margin, mbs_budget, sbs_budget, mu_floor, su_floor, feasible: false };
    report.feasible = report.is_feasible(FEAS_TOL);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params(noise: f64, gap: f64, gamma: f64) -> FadingParams {
        FadingParams { noise_power: noise, sinr_gap: gap, gamma_si: gamma, ..FadingParams::default() }
    }

    fn single_mu_gains(n: usize) -> EffectiveGains {
        EffectiveGains {
            a_mu: vec![1.0],
            a_bh: vec![1.0; n],
            a_su: vec![1.0; n],
            c_sbs_mu: vec![vec![1.0]; n],
            c_sbs_sbs: vec![vec![0.0; n]; n],
            c_sbs_su: vec![vec![0.0; n]; n],
            c_mbs_su_mu: vec![vec![0.0; n]; 1],
            c_mbs_su_bh: vec![vec![0.0; n]; n],
        }
    }

    #[test]
    fn mu_sinr_without_small_cells() {
        let g = single_mu_gains(0);
        let p = PowerVector::new(vec![1.0], vec![], vec![]).unwrap();
        assert!((sinr_mu(0, &p, &g, &params(0.1, 1.0, 0.0)) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sbs_interference_equal_to_noise_halves_mu_sinr() {
        let g = single_mu_gains(1);
        let pr = params(0.1, 1.0, 0.0);
        let p = PowerVector::new(vec![1.0], vec![1.0], vec![0.1]).unwrap();
        assert!((sinr_mu(0, &p, &g, &pr) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn backhaul_denominator_is_noise_when_gamma_zero() {
        let g = single_mu_gains(1);
        let pr = params(0.25, 1.0, 0.0);
        let p = PowerVector::new(vec![1.0], vec![2.0], vec![0.1]).unwrap();
        assert!((sinr_bh(0, &p, &g, &pr) - 2.0 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn self_interference_adds_gamma_times_sbs_power() {
        let mut g = single_mu_gains(1);
        g.a_bh[0] = 1e-6;
        let pr = params(1e-6, 1.0, 1e-5);
        let p = PowerVector::new(vec![1.0], vec![1.0], vec![0.1]).unwrap();
        // denominator = 1e-6 noise + 1e-6 self-interference
        assert!((sinr_bh(0, &p, &g, &pr) - 0.5).abs() < 1e-12);
        let doubled = PowerVector::new(vec![1.0], vec![2.0], vec![0.1]).unwrap();
        assert_eq!(sinr_bh(0, &doubled, &g, &pr), 2.0 * sinr_bh(0, &p, &g, &pr));
    }

    #[test]
    fn su_sinr_without_cross_gains_is_snr() {
        let mut g = single_mu_gains(2);
        g.a_su = vec![3.0, 5.0];
        let pr = params(0.5, 1.0, 0.0);
        let p = PowerVector::new(vec![1.0], vec![1.0, 1.0], vec![0.1, 0.2]).unwrap();
        assert!((sinr_su(1, &p, &g, &pr) - 0.2 * 5.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn rate_values() {
        assert!((rate(1.0, &params(1.0, 1.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((rate(3.0, &params(1.0, 1.0, 0.0)) - 2.0).abs() < 1e-15);
        assert!((rate(6.0, &params(1.0, 2.0, 0.0)) - 2.0).abs() < 1e-15);
        assert_eq!(rate(0.0, &params(1.0, 1.0, 0.0)), 0.0);
    }

    #[test]
    fn default_limits_match_dbm_budgets() {
        let l = Limits::default();
        assert!((l.p_mbs_max - 39.810_717_055_349_7).abs() < 1e-9);
        assert!((l.p_sbs_max - 0.1).abs() < 1e-15);
    }

    #[test]
    fn over_budget_mbs_power_violates_c2() {
        let g = single_mu_gains(1);
        let pr = FadingParams::default();
        let limits = Limits { r_min_mu: 0.0, r_min_su: 0.0, ..Limits::default() };
        let p = PowerVector::new(vec![30.0], vec![10.0], vec![0.1]).unwrap();
        let report = check_constraints(&p, &g, &pr, &limits);
        assert!(report.mbs_budget < 0.0);
        assert!(!report.feasible);
        // 20 dBm SBS power sits exactly on the C3 boundary.
        assert_eq!(report.sbs_budget[0], 0.0);
    }

    #[test]
    fn floor_powers_meet_power_constraints() {
        let g = single_mu_gains(2);
        let pr = FadingParams::default();
        let limits = Limits { r_min_mu: 0.0, r_min_su: 0.0, ..Limits::default() };
        let p = PowerVector::uniform(1, 2, 0.0, 0.0);
        let report = check_constraints(&p, &g, &pr, &limits);
        assert!(report.mbs_budget > 0.0 && report.sbs_budget.iter().all(|&v| v > 0.0));
        assert!(report.mu_floor.iter().chain(&report.su_floor).all(|&v| v >= 0.0));
        let r = objective(&p, &g, &pr);
        for (n, backhaul_margin) in report.backhaul_margin.iter().enumerate() {
            assert!((backhaul_margin - (r.r_bh[n] - r.r_su[n])).abs() < 1e-15);
        }
    }

    #[test]
    fn powers_below_floor_are_clamped() {
        let p = PowerVector::new(vec![0.0], vec![1e-20], vec![-1.0]).unwrap();
        assert!(p.to_flat().iter().all(|&v| v == P_FLOOR));
    }
}
