//! Link-level description of a power allocation problem.
//!
//! Each link's SINR is `signal / (sum_j c_j p_j + noise)` with the signal
//! either `gain * p_var` or a fixed received power. The proposed full-duplex
//! network, the half-duplex variant and the reduced wired-backhaul problem are
//! all instances; the solver in [`crate::cccp`] only sees this form.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{log2_1p, powf};
use crate::model::{EffectiveGains, FadingParams};
use crate::rates::{Limits, P_FLOOR};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Signal {
    /// Received power `gain * p[var]`.
    Var { var: usize, gain: f64 },
    /// Received power fixed in watts.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub signal: Signal,
    /// `(var, coefficient)` pairs; coefficients are non-negative.
    pub interferers: Vec<(usize, f64)>,
    /// Noise plus any interference not controlled by the optimizer, watts.
    pub noise: f64,
}

impl Link {
    pub fn received_signal(&self, p: &[f64]) -> f64 {
        match self.signal {
            Signal::Var { var, gain } => gain * p[var],
            Signal::Fixed(s) => s,
        }
    }

    pub fn interference(&self, p: &[f64]) -> f64 {
        self.interferers.iter().map(|&(j, c)| c * p[j]).sum::<f64>() + self.noise
    }

    pub fn sinr(&self, p: &[f64]) -> f64 {
        self.received_signal(p) / self.interference(p)
    }
}

/// Backhaul-capacity coupling: rate of link `access` must not exceed the rate
/// of link `backhaul`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub backhaul: usize,
    pub access: usize,
}

/// `sum_{j in vars} p_j <= cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub vars: Vec<usize>,
    pub cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFloor {
    pub link: usize,
    pub min_rate: f64,
}

/// Index layout of the proposed network: variables and links share the order
/// `[MU streams | backhaul streams | SBS access]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub num_mus: usize,
    pub num_sbs: usize,
}

impl Layout {
    pub fn mu(&self, k: usize) -> usize {
        k
    }

    pub fn bh(&self, n: usize) -> usize {
        self.num_mus + n
    }

    pub fn su(&self, n: usize) -> usize {
        self.num_mus + self.num_sbs + n
    }

    pub fn len(&self) -> usize {
        self.num_mus + 2 * self.num_sbs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    pub num_vars: usize,
    pub links: Vec<Link>,
    /// Objective weight per link (zero for backhaul links).
    pub weights: Vec<f64>,
    pub couplings: Vec<Coupling>,
    pub budgets: Vec<Budget>,
    pub floors: Vec<RateFloor>,
    pub sinr_gap: f64,
    pub p_floor: f64,
}

/// Signed residuals of a [`PowerProblem`]'s constraints at a power vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub couplings: Vec<f64>,
    pub budgets: Vec<f64>,
    pub floors: Vec<f64>,
}

impl Residuals {
    pub fn max_violation(&self) -> f64 {
        let worst = self.couplings.iter().chain(&self.budgets).chain(&self.floors).copied().fold(0.0, f64::min);
        -worst
    }
}

impl PowerProblem {
    /// The full-duplex self-backhaul problem over `[p_mu | p_bh | p_sbs]`.
    pub fn proposed(g: &EffectiveGains, params: &FadingParams, limits: &Limits) -> Self {
        let layout = Layout { num_mus: g.num_mus(), num_sbs: g.num_sbs() };
        let (k, n) = (layout.num_mus, layout.num_sbs);
        let noise = params.noise_power;
        let mut links = Vec::with_capacity(layout.len());
        for mu in 0..k {
            let interferers = (0..n).map(|s| (layout.su(s), g.c_sbs_mu[s][mu])).filter(|&(_, c)| c > 0.0).collect();
            links.push(Link { signal: Signal::Var { var: layout.mu(mu), gain: g.a_mu[mu] }, interferers, noise });
        }
        for b in 0..n {
            let mut interferers: Vec<(usize, f64)> =
                (0..n).filter(|&s| s != b).map(|s| (layout.su(s), g.c_sbs_sbs[s][b])).filter(|&(_, c)| c > 0.0).collect();
            if params.gamma_si > 0.0 {
                interferers.push((layout.su(b), params.gamma_si));
            }
            links.push(Link { signal: Signal::Var { var: layout.bh(b), gain: g.a_bh[b] }, interferers, noise });
        }
        for u in 0..n {
            let mut interferers: Vec<(usize, f64)> = (0..k).map(|mu| (layout.mu(mu), g.c_mbs_su_mu[mu][u])).collect();
            interferers.extend((0..n).map(|b| (layout.bh(b), g.c_mbs_su_bh[b][u])));
            interferers.extend((0..n).filter(|&s| s != u).map(|s| (layout.su(s), g.c_sbs_su[s][u])));
            interferers.retain(|&(_, c)| c > 0.0);
            links.push(Link { signal: Signal::Var { var: layout.su(u), gain: g.a_su[u] }, interferers, noise });
        }

        let mut weights = vec![1.0; layout.len()];
        for b in 0..n {
            weights[layout.bh(b)] = 0.0;
        }
        let couplings = (0..n).map(|s| Coupling { backhaul: layout.bh(s), access: layout.su(s) }).collect();
        let mut budgets = vec![Budget { vars: (0..k + n).collect(), cap: limits.p_mbs_max }];
        budgets.extend((0..n).map(|s| Budget { vars: vec![layout.su(s)], cap: limits.p_sbs_max }));
        let mut floors = Vec::new();
        if limits.r_min_mu > 0.0 {
            floors.extend((0..k).map(|mu| RateFloor { link: layout.mu(mu), min_rate: limits.r_min_mu }));
        }
        if limits.r_min_su > 0.0 {
            floors.extend((0..n).map(|s| RateFloor { link: layout.su(s), min_rate: limits.r_min_su }));
        }

        Self { num_vars: layout.len(), links, weights, couplings, budgets, floors, sinr_gap: params.sinr_gap, p_floor: P_FLOOR }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.weights.len() != self.links.len() {
            return Err(Error::Dimension { expected: self.links.len(), got: self.weights.len() });
        }
        let var_ok = |v: usize| v < self.num_vars;
        for link in &self.links {
            if let Signal::Var { var, gain } = link.signal {
                if !var_ok(var) || !(gain >= 0.0) {
                    return Err(Error::InvalidConfig("link signal refers to an invalid variable or negative gain"));
                }
            }
            if !(link.noise > 0.0) || link.interferers.iter().any(|&(j, c)| !var_ok(j) || !(c >= 0.0) || !c.is_finite()) {
                return Err(Error::InvalidConfig("link noise must be positive and interference gains valid"));
            }
        }
        let link_ok = |l: usize| l < self.links.len();
        if self.couplings.iter().any(|c| !link_ok(c.backhaul) || !link_ok(c.access)) || self.floors.iter().any(|f| !link_ok(f.link)) {
            return Err(Error::InvalidConfig("constraint refers to an unknown link"));
        }
        for v in 0..self.num_vars {
            if !self.budgets.iter().any(|b| b.vars.contains(&v)) {
                return Err(Error::InvalidConfig("every variable needs a power budget"));
            }
        }
        if self.budgets.iter().any(|b| !(b.cap > self.p_floor * b.vars.len() as f64) || b.vars.iter().any(|&v| !var_ok(v))) {
            return Err(Error::InvalidConfig("budget caps must exceed the power floor"));
        }
        Ok(())
    }

    pub fn layout_if_proposed(&self) -> Option<Layout> {
        let n = self.couplings.len();
        (self.num_vars >= 2 * n).then(|| Layout { num_mus: self.num_vars - 2 * n, num_sbs: n })
    }

    pub fn sinrs(&self, p: &[f64]) -> Vec<f64> {
        self.links.iter().map(|l| l.sinr(p)).collect()
    }

    pub fn link_rate(&self, link: usize, p: &[f64]) -> f64 {
        log2_1p(self.links[link].sinr(p) / self.sinr_gap)
    }

    pub fn rates(&self, p: &[f64]) -> Vec<f64> {
        (0..self.links.len()).map(|l| self.link_rate(l, p)).collect()
    }

    /// Weighted sum rate.
    pub fn objective(&self, p: &[f64]) -> f64 {
        self.rates(p).iter().zip(&self.weights).map(|(r, w)| r * w).sum()
    }

    /// SINR needed to reach `rate` bits/s/Hz.
    pub fn sinr_for_rate(&self, rate: f64) -> f64 {
        self.sinr_gap * (powf(2.0, rate) - 1.0)
    }

    pub fn residuals(&self, p: &[f64]) -> Residuals {
        let couplings = self.couplings.iter().map(|c| self.link_rate(c.backhaul, p) - self.link_rate(c.access, p)).collect();
        let budgets = self.budgets.iter().map(|b| b.cap - b.vars.iter().map(|&v| p[v]).sum::<f64>()).collect();
        let floors = self.floors.iter().map(|f| self.link_rate(f.link, p) - f.min_rate).collect();
        Residuals { couplings, budgets, floors }
    }

    /// Smallest cap among the budgets containing each variable.
    pub fn upper_bounds(&self) -> Vec<f64> {
        let mut ub = vec![f64::INFINITY; self.num_vars];
        for b in &self.budgets {
            for &v in &b.vars {
                ub[v] = ub[v].min(b.cap);
            }
        }
        ub
    }

    /// Splits `fraction` of every budget uniformly over its variables; a
    /// variable in several budgets takes the smallest share.
    pub fn uniform_start(&self, fraction: f64) -> Vec<f64> {
        let mut p = vec![f64::INFINITY; self.num_vars];
        for b in &self.budgets {
            let share = fraction * b.cap / b.vars.len() as f64;
            for &v in &b.vars {
                p[v] = p[v].min(share);
            }
        }
        p.into_iter().map(|v| v.max(self.p_floor)).collect()
    }
}
