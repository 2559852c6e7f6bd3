//! Concave lower bounds on the link rates in log-power variables.
//!
//! With `z = sinr / gap`, `log2(1 + z) >= alpha log2 z + mu` for all `z > 0`,
//! with equality at the anchor `z0`. Substituting `x = ln p` turns every
//! `log2 z` into an affine term minus a log-sum-exp, so each relaxed rate is a
//! [`ConcaveExpr`].

use alloc::vec::Vec;

use crate::engine::{ConcaveExpr, LseTerm};
use crate::math::{ln, log2, log2_1p, LN_2};
use crate::problem::{Layout, Link, PowerProblem, Signal};
use crate::rates::PowerVector;
use crate::Error;

/// Anchors below this are clamped so that `alpha` stays positive.
pub const Z0_FLOOR: f64 = 1e-9;

/// `(alpha, mu)` of the bound tight at `z0`.
pub fn scam_constants(z0: f64) -> Result<(f64, f64), Error> {
    if !(z0 > 0.0) || !z0.is_finite() {
        return Err(Error::NonPositiveAnchor(z0));
    }
    let alpha = z0 / (1.0 + z0);
    Ok((alpha, log2_1p(z0) - alpha * log2(z0)))
}

/// Per-link bound constants and the anchors they were built at.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationState {
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub anchor_z: Vec<f64>,
}

impl RelaxationState {
    pub fn from_anchors(anchor_z: impl IntoIterator<Item = f64>) -> Result<Self, Error> {
        let anchor_z: Vec<f64> = anchor_z.into_iter().map(|z| if z.is_finite() { z.max(Z0_FLOOR) } else { z }).collect();
        let mut alpha = Vec::with_capacity(anchor_z.len());
        let mut mu = Vec::with_capacity(anchor_z.len());
        for &z in &anchor_z {
            let (a, m) = scam_constants(z)?;
            alpha.push(a);
            mu.push(m);
        }
        Ok(Self { alpha, mu, anchor_z })
    }

    /// Bound tight at the SINRs of `p` (linear watts).
    pub fn tight_at(problem: &PowerProblem, p: &[f64]) -> Result<Self, Error> {
        Self::from_anchors(problem.sinrs(p).into_iter().map(|s| s / problem.sinr_gap))
    }

    /// New state anchored at `sinrs`.
    pub fn retighten(&self, sinrs: &[f64], sinr_gap: f64) -> Result<Self, Error> {
        if sinrs.len() != self.alpha.len() {
            return Err(Error::Dimension { expected: self.alpha.len(), got: sinrs.len() });
        }
        Self::from_anchors(sinrs.iter().map(|s| s / sinr_gap))
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Log powers `x = ln p`, same layout as the linear vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPowerVector(pub Vec<f64>);

impl LogPowerVector {
    pub fn from_powers(p: &[f64]) -> Self {
        Self(p.iter().map(|&v| ln(v)).collect())
    }

    pub fn powers(&self) -> Vec<f64> {
        self.0.iter().map(|&v| crate::math::exp(v)).collect()
    }

    pub fn to_power_vector(&self, num_mus: usize, num_sbs: usize) -> Result<PowerVector, Error> {
        PowerVector::from_flat(num_mus, num_sbs, &self.powers())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn interference_term(link: &Link, weight: f64) -> LseTerm {
    LseTerm::new(weight, link.interferers.iter().copied(), link.noise)
}

/// `ln` of the received signal as `(constant, optional var)`.
fn log_signal(link: &Link) -> (f64, Option<usize>) {
    match link.signal {
        Signal::Var { var, gain } => (ln(gain), Some(var)),
        Signal::Fixed(s) => (ln(s), None),
    }
}

/// Relaxed rate of one link in bits/s/Hz.
pub fn relaxed_link_expr(problem: &PowerProblem, relax: &RelaxationState, link: usize) -> ConcaveExpr {
    let l = &problem.links[link];
    let (a, mu) = (relax.alpha[link], relax.mu[link]);
    let (ln_s, var) = log_signal(l);
    let scale = a / LN_2;
    let mut e = ConcaveExpr::affine(scale * (ln_s - ln(problem.sinr_gap)) + mu, Vec::new());
    if let Some(v) = var {
        e.linear.push((v, scale));
    }
    e.lse.push(interference_term(l, scale));
    e
}

pub fn relaxed_link_rate(problem: &PowerProblem, relax: &RelaxationState, link: usize, x: &[f64]) -> f64 {
    relaxed_link_expr(problem, relax, link).value(x)
}

pub fn relaxed_link_gradient(problem: &PowerProblem, relax: &RelaxationState, link: usize, x: &[f64]) -> Vec<f64> {
    relaxed_link_expr(problem, relax, link).gradient(x)
}

/// Weighted sum of the relaxed rates.
pub fn relaxed_objective_expr(problem: &PowerProblem, relax: &RelaxationState) -> ConcaveExpr {
    let mut obj = ConcaveExpr::default();
    for (l, &w) in problem.weights.iter().enumerate() {
        if w > 0.0 {
            obj.add_scaled(&relaxed_link_expr(problem, relax, l), w);
        }
    }
    obj
}

pub fn relaxed_objective(problem: &PowerProblem, relax: &RelaxationState, x: &[f64]) -> f64 {
    relaxed_objective_expr(problem, relax).value(x)
}

pub fn relaxed_objective_gradient(problem: &PowerProblem, relax: &RelaxationState, x: &[f64]) -> Vec<f64> {
    relaxed_objective_expr(problem, relax).gradient(x)
}

pub fn relaxed_rate_mu(problem: &PowerProblem, layout: Layout, relax: &RelaxationState, k: usize, x: &[f64]) -> f64 {
    relaxed_link_rate(problem, relax, layout.mu(k), x)
}

pub fn relaxed_rate_bh(problem: &PowerProblem, layout: Layout, relax: &RelaxationState, n: usize, x: &[f64]) -> f64 {
    relaxed_link_rate(problem, relax, layout.bh(n), x)
}

pub fn relaxed_rate_su(problem: &PowerProblem, layout: Layout, relax: &RelaxationState, n: usize, x: &[f64]) -> f64 {
    relaxed_link_rate(problem, relax, layout.su(n), x)
}

/// The two concave parts of `phi = Rbar_backhaul - Rbar_access` for coupling
/// `c`; the solver linearizes the second.
pub fn dc_constraint(problem: &PowerProblem, relax: &RelaxationState, c: usize) -> (ConcaveExpr, ConcaveExpr) {
    let cp = problem.couplings[c];
    (relaxed_link_expr(problem, relax, cp.backhaul), relaxed_link_expr(problem, relax, cp.access))
}

/// `ln(signal / gap + interference)` as a log-sum-exp term.
fn received_over_gap_term(link: &Link, gap: f64, weight: f64) -> LseTerm {
    let mut terms: Vec<(usize, f64)> = link.interferers.clone();
    let mut offset = link.noise;
    match link.signal {
        Signal::Var { var, gain } => terms.push((var, gain / gap)),
        Signal::Fixed(s) => offset += s / gap,
    }
    LseTerm::new(weight, terms, offset)
}

/// Concave minorant of the exact coupling `R_backhaul - R_access`, tight at
/// `x_t`.
///
/// Exactly, `R_b - R_s = log2(S_b/w + I_b) - log2 I_b - log2(S_s/w + I_s) +
/// log2 I_s`. The first and last terms are convex in `x` and are replaced by
/// their tangents at `x_t`.
pub fn exact_coupling_minorant(problem: &PowerProblem, c: usize, x_t: &[f64]) -> ConcaveExpr {
    let cp = problem.couplings[c];
    let (bh, acc) = (&problem.links[cp.backhaul], &problem.links[cp.access]);
    let w = 1.0 / LN_2;
    let mut e = received_over_gap_term(bh, problem.sinr_gap, w).tangent(x_t);
    e.add_scaled(&interference_term(acc, w).tangent(x_t), 1.0);
    e.lse.push(interference_term(bh, w));
    e.lse.push(received_over_gap_term(acc, problem.sinr_gap, w));
    e
}

/// `log2 sinr - log2 sinr_min >= 0` for a rate floor.
pub fn floor_expr(problem: &PowerProblem, floor: usize) -> ConcaveExpr {
    let f = problem.floors[floor];
    let l = &problem.links[f.link];
    let (ln_s, var) = log_signal(l);
    let w = 1.0 / LN_2;
    let mut e = ConcaveExpr::affine(w * (ln_s - ln(problem.sinr_for_rate(f.min_rate))), Vec::new());
    if let Some(v) = var {
        e.linear.push((v, w));
    }
    e.lse.push(interference_term(l, w));
    e
}

/// `ln cap - ln(sum p) >= 0` for a power budget.
pub fn budget_expr(problem: &PowerProblem, budget: usize) -> ConcaveExpr {
    let b = &problem.budgets[budget];
    let mut e = ConcaveExpr::affine(ln(b.cap), Vec::new());
    e.lse.push(LseTerm::new(1.0, b.vars.iter().map(|&v| (v, 1.0)), 0.0));
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;
    use crate::model::{build_effective_gains, drop_topology, FadingParams, TopologyConfig};
    use crate::rates::Limits;
    use alloc::vec;
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn instance(seed: u64) -> PowerProblem {
        let cfg = TopologyConfig { num_antennas: 16, ..TopologyConfig::default() };
        let params = FadingParams::default();
        let topo = drop_topology(&cfg, seed).unwrap();
        let ch = build_effective_gains(&topo, &params, seed).unwrap();
        PowerProblem::proposed(&ch.gains, &params, &Limits::default())
    }

    #[test]
    fn constants_match_worked_values() {
        let (a, m) = scam_constants(1.0).unwrap();
        assert_eq!(a, 0.5);
        assert!((m - 1.0).abs() < 1e-15);
        let (a, m) = scam_constants(3.0).unwrap();
        assert!((a - 0.75).abs() < 1e-15);
        assert!((m - 0.811_278_124_459_132_8).abs() < 1e-12);
        assert!((a * log2(3.0) + m - 2.0).abs() < 1e-12);
        assert!(scam_constants(0.0).is_err());
        assert!(scam_constants(-1.0).is_err());
    }

    #[test]
    fn anchors_are_floored() {
        let s = RelaxationState::from_anchors([0.0, 1e-20, 2.0]).unwrap();
        assert_eq!(s.anchor_z[0], Z0_FLOOR);
        assert!(s.alpha.iter().all(|&a| a > 0.0 && a < 1.0));
    }

    #[test]
    fn relaxed_rates_are_tight_at_the_anchor() {
        let problem = instance(3);
        let p = problem.uniform_start(0.5);
        let relax = RelaxationState::tight_at(&problem, &p).unwrap();
        let x = LogPowerVector::from_powers(&p);
        for l in 0..problem.links.len() {
            let exact = problem.link_rate(l, &p);
            assert!((relaxed_link_rate(&problem, &relax, l, x.as_slice()) - exact).abs() < 1e-10, "link {l}");
        }
    }

    #[test]
    fn retighten_is_idempotent() {
        let problem = instance(4);
        let p = problem.uniform_start(0.3);
        let relax = RelaxationState::tight_at(&problem, &problem.uniform_start(0.9)).unwrap();
        let sinrs = problem.sinrs(&p);
        let a = relax.retighten(&sinrs, problem.sinr_gap).unwrap();
        let b = a.retighten(&sinrs, problem.sinr_gap).unwrap();
        assert_eq!(a, b);
        let x = LogPowerVector::from_powers(&p);
        assert!(relaxed_objective(&problem, &a, x.as_slice()) >= relaxed_objective(&problem, &relax, x.as_slice()) - 1e-12);
    }

    #[test]
    fn single_interference_free_mu_is_affine_with_slope_alpha_over_ln2() {
        let problem = PowerProblem {
            num_vars: 1,
            links: vec![Link { signal: Signal::Var { var: 0, gain: 2.0 }, interferers: vec![], noise: 1e-3 }],
            weights: vec![1.0],
            couplings: vec![],
            budgets: vec![crate::problem::Budget { vars: vec![0], cap: 1.0 }],
            floors: vec![],
            sinr_gap: 3.0,
            p_floor: 1e-10,
        };
        let relax = RelaxationState::from_anchors([5.0]).unwrap();
        let g = relaxed_link_gradient(&problem, &relax, 0, &[-1.0]);
        assert!((g[0] - relax.alpha[0] / LN_2).abs() < 1e-15);
        let f = |x: f64| relaxed_link_rate(&problem, &relax, 0, &[x]);
        assert!((f(1.0) - 2.0 * f(0.0) + f(-1.0)).abs() < 1e-12);
    }

    #[test]
    fn exact_coupling_minorant_bounds_the_true_gap() {
        let problem = instance(7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xt = LogPowerVector::from_powers(&problem.uniform_start(0.4));
        for c in 0..problem.couplings.len() {
            let e = exact_coupling_minorant(&problem, c, xt.as_slice());
            let cp = problem.couplings[c];
            let p_t = xt.powers();
            let gap_t = problem.link_rate(cp.backhaul, &p_t) - problem.link_rate(cp.access, &p_t);
            assert!((e.value(xt.as_slice()) - gap_t).abs() < 1e-9);
            for _ in 0..200 {
                let x: Vec<f64> = (0..problem.num_vars).map(|_| uniform(&mut rng, -12.0, 3.0)).collect();
                let p: Vec<f64> = x.iter().map(|&v| exp(v)).collect();
                let gap = problem.link_rate(cp.backhaul, &p) - problem.link_rate(cp.access, &p);
                assert!(e.value(&x) <= gap + 1e-9);
            }
        }
    }

    #[test]
    fn floor_and_budget_expressions_match_direct_checks() {
        let problem = instance(9);
        let p = problem.uniform_start(0.5);
        let x = LogPowerVector::from_powers(&p);
        for (i, f) in problem.floors.iter().enumerate() {
            let direct = log2(problem.links[f.link].sinr(&p) / problem.sinr_for_rate(f.min_rate));
            assert!((floor_expr(&problem, i).value(x.as_slice()) - direct).abs() < 1e-10);
            let sign_ok = (floor_expr(&problem, i).value(x.as_slice()) >= 0.0) == (problem.link_rate(f.link, &p) >= f.min_rate);
            assert!(sign_ok);
        }
        for (i, b) in problem.budgets.iter().enumerate() {
            let direct = ln(b.cap / b.vars.iter().map(|&v| p[v]).sum::<f64>());
            assert!((budget_expr(&problem, i).value(x.as_slice()) - direct).abs() < 1e-12);
        }
    }
}
