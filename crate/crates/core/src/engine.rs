//! Log-barrier interior-point solver for the concave subproblems.
//!
//! Every function handled here has the form
//! `constant + a.x - sum_t w_t ln(sum_j c_tj e^{x_j} + d_t)` with `w_t >= 0`,
//! which is concave (log-sum-exp is convex). Relaxed rates, their Taylor
//! pieces, power budgets in log form and log-SINR rate floors all fit it.
//!
//! The solver maximizes such an objective subject to such constraints being
//! non-negative. Centering uses damped Newton steps with the closed-form
//! Hessian; the barrier weight starts at `mu0` and shrinks by `mu_decrease` per
//! stage until `m * mu` falls below the duality-gap tolerance.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::spd_solve;
use crate::math::{exp, ln};
use crate::Error;

/// `weight * ln(sum_j coef_j e^{x_j} + offset)`, stored with log-coefficients
/// so it can be evaluated with a max shift.
#[derive(Debug, Clone, PartialEq)]
pub struct LseTerm {
    pub weight: f64,
    /// `(var, ln coef)`.
    terms: Vec<(usize, f64)>,
    /// `ln offset`, `-inf` when there is no offset.
    ln_offset: f64,
}

impl LseTerm {
    /// Zero coefficients are dropped. Panics if nothing positive remains.
    pub fn new(weight: f64, terms: impl IntoIterator<Item = (usize, f64)>, offset: f64) -> Self {
        let terms: Vec<(usize, f64)> = terms.into_iter().filter(|&(_, c)| c > 0.0).map(|(v, c)| (v, ln(c))).collect();
        let ln_offset = if offset > 0.0 { ln(offset) } else { f64::NEG_INFINITY };
        assert!(!terms.is_empty() || offset > 0.0, "log-sum-exp term needs a positive summand");
        Self { weight, terms, ln_offset }
    }

    /// `ln(sum_j c_j e^{x_j} + d)` and the softmax weights of the variable
    /// summands.
    fn eval(&self, x: &[f64], q: &mut Vec<f64>) -> f64 {
        let mut m = self.ln_offset;
        for &(v, lc) in &self.terms {
            m = m.max(lc + x[v]);
        }
        q.clear();
        let mut s = if self.ln_offset.is_finite() { exp(self.ln_offset - m) } else { 0.0 };
        for &(v, lc) in &self.terms {
            let e = exp(lc + x[v] - m);
            q.push(e);
            s += e;
        }
        for e in q.iter_mut() {
            *e /= s;
        }
        m + ln(s)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut q = Vec::new();
        self.eval(x, &mut q)
    }

    /// `weight * ln(...)` replaced by its tangent at `x`, an affine
    /// under-estimator since the term is convex.
    pub fn tangent(&self, x: &[f64]) -> ConcaveExpr {
        let mut q = Vec::new();
        let v = self.eval(x, &mut q);
        let mut linear = Vec::with_capacity(self.terms.len());
        let mut c = self.weight * v;
        for (i, &(var, _)) in self.terms.iter().enumerate() {
            linear.push((var, self.weight * q[i]));
            c -= self.weight * q[i] * x[var];
        }
        ConcaveExpr::affine(c, linear)
    }
}

/// Concave function `constant + linear.x - sum(lse)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConcaveExpr {
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    pub lse: Vec<LseTerm>,
}

impl ConcaveExpr {
    pub fn affine(constant: f64, linear: Vec<(usize, f64)>) -> Self {
        Self { constant, linear, lse: Vec::new() }
    }

    /// Adds `scale * other`; `scale` must be non-negative to keep concavity.
    pub fn add_scaled(&mut self, other: &ConcaveExpr, scale: f64) {
        self.constant += scale * other.constant;
        self.linear.extend(other.linear.iter().map(|&(v, a)| (v, scale * a)));
        self.lse.extend(other.lse.iter().map(|t| LseTerm { weight: t.weight * scale, ..t.clone() }));
    }

    /// Same arithmetic order as [`Self::eval_derivs`], so both agree on the
    /// sign of values near zero.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut q = Vec::new();
        let mut v = self.constant;
        for &(j, a) in &self.linear {
            v += a * x[j];
        }
        for t in &self.lse {
            v -= t.weight * t.eval(x, &mut q);
        }
        v
    }

    /// Value, with gradient and (optionally) Hessian written into the
    /// zero-initialized `grad` (len `n`) and `hess` (`n x n`, row-major).
    pub fn eval_derivs(&self, x: &[f64], grad: &mut [f64], mut hess: Option<&mut [f64]>) -> f64 {
        let n = grad.len();
        let mut q = Vec::new();
        let mut v = self.constant;
        for &(j, a) in &self.linear {
            v += a * x[j];
            grad[j] += a;
        }
        for t in &self.lse {
            v -= t.weight * t.eval(x, &mut q);
            for (i, &(vi, _)) in t.terms.iter().enumerate() {
                grad[vi] -= t.weight * q[i];
            }
            if let Some(h) = hess.as_deref_mut() {
                for (i, &(vi, _)) in t.terms.iter().enumerate() {
                    h[vi * n + vi] -= t.weight * q[i];
                    for (j, &(vj, _)) in t.terms.iter().enumerate() {
                        h[vi * n + vj] += t.weight * q[i] * q[j];
                    }
                }
            }
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.eval_derivs(x, &mut g, None);
        g
    }

    /// First-order Taylor expansion at `x` (an affine over-estimator).
    pub fn tangent(&self, x: &[f64]) -> ConcaveExpr {
        let g = self.gradient(x);
        let v = self.value(x);
        let c = v - g.iter().zip(x).map(|(g, x)| g * x).sum::<f64>();
        ConcaveExpr::affine(c, g.into_iter().enumerate().filter(|&(_, g)| g != 0.0).collect())
    }

    /// Same function with an extra linear term on variable `var`.
    fn with_linear(&self, var: usize, coef: f64) -> ConcaveExpr {
        let mut e = self.clone();
        e.linear.push((var, coef));
        e
    }
}

/// What a subproblem constraint stands for, for reporting and for deciding
/// which constraints the feasibility search may relax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRole {
    /// Relaxed backhaul coupling with the access rate linearized.
    Coupling(usize),
    /// Coupling on the exact rates with its convex pieces linearized.
    CouplingExact(usize),
    /// Power budget, `ln cap - ln(sum p) >= 0`.
    Budget(usize),
    /// Rate floor on a link, in log-SINR form.
    Floor(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: ConcaveExpr,
    pub role: ConstraintRole,
    /// May be violated by the slack during the feasibility search.
    pub soft: bool,
}

/// `maximize objective(x)` subject to `constraint(x) >= 0` and
/// `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSubproblem {
    pub dim: usize,
    pub objective: ConcaveExpr,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ConvexSubproblem {
    fn bound_exprs(&self) -> Vec<ConcaveExpr> {
        let mut out = Vec::with_capacity(2 * self.dim);
        for i in 0..self.dim {
            out.push(ConcaveExpr::affine(-self.lower[i], vec![(i, 1.0)]));
            out.push(ConcaveExpr::affine(self.upper[i], vec![(i, -1.0)]));
        }
        out
    }

    /// Smallest constraint value at `x`, bounds included.
    pub fn min_constraint(&self, x: &[f64]) -> f64 {
        let cons = self.constraints.iter().map(|c| c.expr.value(x));
        let bounds = self.bound_exprs().into_iter().map(|b| b.value(x)).collect::<Vec<_>>();
        cons.chain(bounds).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility tolerance.
    pub feas: f64,
    /// Scaled stationarity tolerance.
    pub kkt: f64,
    /// Bound on `m * mu` at the last stage.
    pub gap: f64,
    pub mu0: f64,
    pub mu_decrease: f64,
    pub max_stages: usize,
    pub max_newton: usize,
    /// Newton decrement `lambda^2 / 2` below which a stage counts as centered.
    pub newton_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feas: 1e-8, kkt: 1e-6, gap: 1e-8, mu0: 1.0, mu_decrease: 10.0, max_stages: 12, max_newton: 200, newton_tol: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub solution: Vec<f64>,
    pub objective_value: f64,
    pub max_primal_residual: f64,
    pub stationarity_residual: f64,
    /// Newton steps taken.
    pub iterations: usize,
    pub converged: bool,
}

struct BarrierOutcome {
    x: Vec<f64>,
    iterations: usize,
    stationarity: f64,
    completed: bool,
}

/// Constraint values below this count as outside the interior, so that
/// `1 / g^2` in the barrier Hessian stays finite.
const MIN_SLACK: f64 = 1e-100;

/// Value of `f0 + mu * sum ln g_i`, `None` outside the strict interior.
fn barrier_value(obj: &ConcaveExpr, cons: &[ConcaveExpr], mu: f64, x: &[f64]) -> Option<f64> {
    let mut v = obj.value(x);
    for c in cons {
        let g = c.value(x);
        if !(g > MIN_SLACK) {
            return None;
        }
        v += mu * ln(g);
    }
    v.is_finite().then_some(v)
}

fn barrier_derivs(obj: &ConcaveExpr, cons: &[ConcaveExpr], mu: f64, x: &[f64], grad: &mut [f64], hess: &mut [f64], obj_grad: &mut [f64]) {
    let n = x.len();
    grad.fill(0.0);
    hess.fill(0.0);
    obj.eval_derivs(x, grad, Some(hess));
    obj_grad.copy_from_slice(grad);
    let mut cg = vec![0.0; n];
    let mut ch = vec![0.0; n * n];
    for c in cons {
        cg.fill(0.0);
        ch.fill(0.0);
        let g = c.eval_derivs(x, &mut cg, Some(&mut ch));
        let inv = mu / g;
        let inv2 = mu / (g * g);
        for i in 0..n {
            grad[i] += inv * cg[i];
            if cg[i] == 0.0 {
                for j in 0..n {
                    hess[i * n + j] += inv * ch[i * n + j];
                }
                continue;
            }
            for j in 0..n {
                hess[i * n + j] += inv * ch[i * n + j] - inv2 * cg[i] * cg[j];
            }
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Constraints with less slack than this enter the multiplier estimate.
const ACTIVE_SLACK: f64 = 1e-6;

/// Scaled stationarity `|grad f + sum_i lambda_i grad g_i| / max(|grad f|, 1)`
/// with nonnegative least-squares multipliers on the near-active constraints.
/// Next to a tight constraint the barrier multipliers `mu / g_i` are not
/// resolvable in floating point, so they are not used here.
fn kkt_residual(obj: &ConcaveExpr, cons: &[ConcaveExpr], x: &[f64]) -> f64 {
    let n = x.len();
    let f_grad = obj.gradient(x);
    let mut active: Vec<Vec<f64>> = cons.iter().filter(|c| c.value(x) <= ACTIVE_SLACK).map(|c| c.gradient(x)).collect();
    let mut r = f_grad.clone();
    while !active.is_empty() {
        let m = active.len();
        let mut gram = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                gram[i * m + j] = (0..n).map(|k| active[i][k] * active[j][k]).sum();
            }
            rhs[i] = -(0..n).map(|k| active[i][k] * f_grad[k]).sum::<f64>();
        }
        let Some(lambda) = spd_solve(&gram, m, &rhs) else { break };
        if let Some(worst) = (0..m).filter(|&i| lambda[i] < 0.0).min_by(|&a, &b| lambda[a].total_cmp(&lambda[b])) {
            active.remove(worst);
            continue;
        }
        for (g, l) in active.iter().zip(&lambda) {
            for k in 0..n {
                r[k] += l * g[k];
            }
        }
        break;
    }
    inf_norm(&r) / inf_norm(&f_grad).max(1.0)
}

/// Early exit test on an accepted iterate.
type StopRule<'a> = &'a dyn Fn(&[f64]) -> bool;

/// Barrier path following from a strictly feasible `x0`. `stop` lets the
/// feasibility search leave as soon as an iterate is good enough.
fn barrier_maximize(
    obj: &ConcaveExpr,
    cons: &[ConcaveExpr],
    x0: Vec<f64>,
    tol: &Tolerances,
    stop: Option<StopRule>,
) -> Result<BarrierOutcome, Error> {
    let n = x0.len();
    let m = cons.len().max(1) as f64;
    let mut x = x0;
    let mut mu = tol.mu0;
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut obj_grad = vec![0.0; n];
    let mut neg_hess = vec![0.0; n * n];
    let mut iterations = 0;
    let mut completed = false;
    let mut stationarity = f64::INFINITY;

    if barrier_value(obj, cons, mu, &x).is_none() {
        return Err(Error::InfeasibleStart { violation: 0.0 });
    }

    'stages: for _ in 0..tol.max_stages {
        let mut centered = false;
        for _ in 0..tol.max_newton {
            barrier_derivs(obj, cons, mu, &x, &mut grad, &mut hess, &mut obj_grad);
            if grad.iter().chain(&hess).any(|g| !g.is_finite()) {
                return Err(Error::NumericalBreakdown("non-finite barrier gradient"));
            }
            for (d, h) in neg_hess.iter_mut().zip(&hess) {
                *d = -h;
            }
            let dir = spd_solve(&neg_hess, n, &grad).ok_or(Error::NumericalBreakdown("barrier Hessian not negative definite"))?;
            let decrement: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            if decrement / 2.0 <= tol.newton_tol {
                centered = true;
                break;
            }
            let current = barrier_value(obj, cons, mu, &x).ok_or(Error::NumericalBreakdown("iterate left the interior"))?;
            let mut step = 1.0;
            let mut trial = vec![0.0; n];
            let accepted = loop {
                for i in 0..n {
                    trial[i] = x[i] + step * dir[i];
                }
                if let Some(v) = barrier_value(obj, cons, mu, &trial) {
                    if v >= current + 0.25 * step * decrement {
                        break true;
                    }
                }
                step *= 0.5;
                if step < 1e-14 {
                    break false;
                }
            };
            if !accepted {
                // No representable ascent left along the Newton direction.
                centered = true;
                break;
            }
            x.copy_from_slice(&trial);
            iterations += 1;
            if let Some(f) = stop {
                if f(&x) {
                    break 'stages;
                }
            }
        }
        stationarity = kkt_residual(obj, cons, &x);
        if centered && m * mu <= tol.gap {
            completed = true;
            break;
        }
        mu /= tol.mu_decrease;
    }
    Ok(BarrierOutcome { x, iterations, stationarity, completed })
}

/// Slack the interior search aims for before handing over.
const INTERIOR_TARGET: f64 = 1e-6;

/// Finds a point where every `g_i > INTERIOR_MARGIN` by maximizing a common
/// slack from `x0`.
fn find_interior(cons: &[ConcaveExpr], x0: &[f64], tol: &Tolerances) -> Result<Option<Vec<f64>>, Error> {
    let n = x0.len();
    let g0 = cons.iter().map(|c| c.value(x0)).fold(f64::INFINITY, f64::min);
    if g0 > INTERIOR_MARGIN {
        return Ok(Some(x0.to_vec()));
    }
    let shifted: Vec<ConcaveExpr> = cons.iter().map(|c| c.with_linear(n, -1.0)).collect();
    let obj = ConcaveExpr::affine(0.0, vec![(n, 1.0)]);
    let mut start = x0.to_vec();
    start.push(g0 - 1.0);
    let stop = |z: &[f64]| z[n] >= INTERIOR_TARGET;
    let out = barrier_maximize(&obj, &shifted, start, tol, Some(&stop))?;
    Ok((out.x[n] > INTERIOR_MARGIN).then(|| out.x[..n].to_vec()))
}

/// Interior margin below which a start is treated as lying on the boundary.
const INTERIOR_MARGIN: f64 = 1e-12;

/// Maximizes the subproblem from a feasible `start`.
///
/// A start on the boundary (within `tol.feas`) is first moved into the strict
/// interior. The returned point is never worse than the start.
pub fn solve(sub: &ConvexSubproblem, start: &[f64], tol: &Tolerances) -> Result<KktReport, Error> {
    if start.len() != sub.dim {
        return Err(Error::Dimension { expected: sub.dim, got: start.len() });
    }
    if start.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("engine start"));
    }
    let mut cons: Vec<ConcaveExpr> = sub.constraints.iter().map(|c| c.expr.clone()).collect();
    cons.extend(sub.bound_exprs());
    let start_min = cons.iter().map(|c| c.value(start)).fold(f64::INFINITY, f64::min);
    if !start_min.is_finite() && start_min != f64::INFINITY {
        return Err(Error::NumericalBreakdown("constraint not finite at start"));
    }
    if start_min < -tol.feas {
        return Err(Error::InfeasibleStart { violation: -start_min });
    }
    let start_value = sub.objective.value(start);

    let interior = if start_min > INTERIOR_MARGIN { Some(start.to_vec()) } else { find_interior(&cons, start, tol)? };
    let Some(x0) = interior else {
        return Ok(KktReport {
            solution: start.to_vec(),
            objective_value: start_value,
            max_primal_residual: (-start_min).max(0.0),
            stationarity_residual: f64::INFINITY,
            iterations: 0,
            converged: false,
        });
    };

    let out = barrier_maximize(&sub.objective, &cons, x0, tol, None)?;
    let mut solution = out.x;
    let mut value = sub.objective.value(&solution);
    if value < start_value {
        solution = start.to_vec();
        value = start_value;
    }
    let min_g = cons.iter().map(|c| c.value(&solution)).fold(f64::INFINITY, f64::min);
    let residual = (-min_g).max(0.0);
    Ok(KktReport {
        solution,
        objective_value: value,
        max_primal_residual: residual,
        stationarity_residual: out.stationarity,
        iterations: out.iterations,
        converged: out.completed && residual <= tol.feas && out.stationarity <= tol.kkt,
    })
}

/// Maximizes a common slack `s` with `soft_i(x) >= s` while keeping the hard
/// constraints and bounds. Leaves as soon as `s >= 0`. Returns the report (in
/// the original variables) and the slack reached.
pub fn solve_feasibility(sub: &ConvexSubproblem, start: &[f64], tol: &Tolerances) -> Result<(KktReport, f64), Error> {
    let n = sub.dim;
    if start.len() != n {
        return Err(Error::Dimension { expected: n, got: start.len() });
    }
    let soft: Vec<ConcaveExpr> = sub.constraints.iter().filter(|c| c.soft).map(|c| c.expr.clone()).collect();
    let mut hard: Vec<ConcaveExpr> = sub.constraints.iter().filter(|c| !c.soft).map(|c| c.expr.clone()).collect();
    hard.extend(sub.bound_exprs());

    let slack_at = |x: &[f64]| soft.iter().map(|c| c.value(x)).fold(f64::INFINITY, f64::min);
    let hard_min = hard.iter().map(|c| c.value(start)).fold(f64::INFINITY, f64::min);
    if hard_min < -tol.feas {
        return Err(Error::InfeasibleStart { violation: -hard_min });
    }
    let report_at = |x: Vec<f64>, iterations: usize, stationarity: f64, converged: bool| {
        let min_hard = hard.iter().map(|c| c.value(&x)).fold(f64::INFINITY, f64::min);
        KktReport {
            objective_value: slack_at(&x),
            max_primal_residual: (-min_hard).max(0.0),
            stationarity_residual: stationarity,
            iterations,
            converged,
            solution: x,
        }
    };
    let s_start = slack_at(start);
    if s_start >= 0.0 {
        return Ok((report_at(start.to_vec(), 0, 0.0, true), s_start));
    }

    let x_hard = if hard_min > INTERIOR_MARGIN { Some(start.to_vec()) } else { find_interior(&hard, start, tol)? };
    let Some(x0) = x_hard else {
        return Ok((report_at(start.to_vec(), 0, f64::INFINITY, false), s_start));
    };

    let mut cons: Vec<ConcaveExpr> = soft.iter().map(|c| c.with_linear(n, -1.0)).collect();
    cons.extend(hard.iter().cloned());
    let obj = ConcaveExpr::affine(0.0, vec![(n, 1.0)]);
    let mut z0 = x0.clone();
    z0.push(slack_at(&x0) - 1.0);
    let stop = |z: &[f64]| z[n] >= 0.0;
    let out = barrier_maximize(&obj, &cons, z0, tol, Some(&stop))?;
    let x = out.x[..n].to_vec();
    let s = slack_at(&x);
    let converged = out.completed || s >= 0.0;
    Ok((report_at(x, out.iterations, out.stationarity, converged), s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LN_2;

    fn bounds(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![lo; n], vec![hi; n])
    }

    #[test]
    fn lse_term_matches_direct_evaluation() {
        let t = LseTerm::new(1.0, [(0, 2.0), (1, 0.5)], 0.25);
        let x = [0.3, -1.2];
        let direct = ln(2.0 * exp(0.3) + 0.5 * exp(-1.2) + 0.25);
        assert!((t.value(&x) - direct).abs() < 1e-14);
        // large arguments stay finite thanks to the shift
        assert!(t.value(&[800.0, 0.0]).is_finite());
    }

    #[test]
    fn expression_gradient_and_hessian_match_finite_differences() {
        let mut e = ConcaveExpr::affine(0.7, vec![(0, 1.5), (2, -0.3)]);
        e.lse.push(LseTerm::new(0.8, [(0, 1.0), (1, 3.0), (2, 0.2)], 0.1));
        e.lse.push(LseTerm::new(0.4, [(1, 2.0)], 1.0));
        let x = [0.2, -0.4, 0.9];
        let mut g = vec![0.0; 3];
        let mut h = vec![0.0; 9];
        e.eval_derivs(&x, &mut g, Some(&mut h));
        let step = 1e-5;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += step;
            xm[i] -= step;
            let fd = (e.value(&xp) - e.value(&xm)) / (2.0 * step);
            assert!((fd - g[i]).abs() < 1e-8, "grad {i}");
            let gp = e.gradient(&xp);
            let gm = e.gradient(&xm);
            for j in 0..3 {
                let fdh = (gp[j] - gm[j]) / (2.0 * step);
                assert!((fdh - h[j * 3 + i]).abs() < 1e-6, "hess {i},{j}");
            }
        }
    }

    #[test]
    fn one_dimensional_interior_optimum_matches_closed_form() {
        // max a x - w ln(e^x + d) is stationary at x* = ln(a d / (w - a)).
        let (a, w, d) = (0.3, 1.0, 2.0);
        let mut obj = ConcaveExpr::affine(0.0, vec![(0, a)]);
        obj.lse.push(LseTerm::new(w, [(0, 1.0)], d));
        let (lower, upper) = bounds(1, -20.0, 20.0);
        let sub = ConvexSubproblem { dim: 1, objective: obj, constraints: vec![], lower, upper };
        let rep = solve(&sub, &[0.0], &Tolerances::default()).unwrap();
        let expected = ln(a * d / (w - a));
        assert!((rep.solution[0] - expected).abs() < 1e-6, "{} vs {}", rep.solution[0], expected);
        assert!(rep.converged);
    }

    #[test]
    fn monotone_objective_is_pushed_to_the_budget() {
        // max x / ln2 subject to ln(cap) - x >= 0
        let cap: f64 = 39.8;
        let obj = ConcaveExpr::affine(0.0, vec![(0, 1.0 / LN_2)]);
        let c = Constraint { expr: ConcaveExpr::affine(ln(cap), vec![(0, -1.0)]), role: ConstraintRole::Budget(0), soft: false };
        let sub = ConvexSubproblem { dim: 1, objective: obj, constraints: vec![c], lower: vec![ln(1e-10)], upper: vec![ln(cap) + 1.0] };
        let rep = solve(&sub, &[0.0], &Tolerances::default()).unwrap();
        assert!((rep.solution[0] - ln(cap)).abs() < 1e-7);
        assert!(rep.max_primal_residual <= 1e-8);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let obj = ConcaveExpr::affine(0.0, vec![(0, 1.0)]);
        let c = Constraint { expr: ConcaveExpr::affine(0.0, vec![(0, -1.0)]), role: ConstraintRole::Budget(0), soft: false };
        let sub = ConvexSubproblem { dim: 1, objective: obj, constraints: vec![c], lower: vec![-5.0], upper: vec![5.0] };
        assert!(matches!(solve(&sub, &[1.0], &Tolerances::default()), Err(Error::InfeasibleStart { .. })));
    }

    #[test]
    fn boundary_start_is_moved_inside_and_never_worsened() {
        // max -ln(e^{x0} + e^{x1}) s.t. x0 + x1 >= 0, optimum at the origin
        let mut obj = ConcaveExpr::default();
        obj.lse.push(LseTerm::new(1.0, [(0, 1.0), (1, 1.0)], 0.0));
        let c = Constraint { expr: ConcaveExpr::affine(0.0, vec![(0, 1.0), (1, 1.0)]), role: ConstraintRole::Coupling(0), soft: false };
        let sub = ConvexSubproblem { dim: 2, objective: obj, constraints: vec![c], lower: vec![-10.0; 2], upper: vec![10.0; 2] };
        let start = [1.0, -1.0];
        let rep = solve(&sub, &start, &Tolerances::default()).unwrap();
        assert!(rep.objective_value >= sub.objective.value(&start) - 1e-12);
        assert!(rep.solution[0].abs() < 1e-4 && rep.solution[1].abs() < 1e-4);
    }

    #[test]
    fn feasibility_returns_immediately_when_already_slack() {
        let c = Constraint { expr: ConcaveExpr::affine(2.0, vec![(0, -1.0)]), role: ConstraintRole::Coupling(0), soft: true };
        let sub = ConvexSubproblem { dim: 1, objective: ConcaveExpr::default(), constraints: vec![c], lower: vec![-5.0], upper: vec![5.0] };
        let (rep, s) = solve_feasibility(&sub, &[0.0], &Tolerances::default()).unwrap();
        assert!(s > 0.0);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn feasibility_reports_negative_slack_when_unsatisfiable() {
        // x <= -1 while x >= 0 by the lower bound
        let c = Constraint { expr: ConcaveExpr::affine(-1.0, vec![(0, -1.0)]), role: ConstraintRole::Coupling(0), soft: true };
        let sub = ConvexSubproblem { dim: 1, objective: ConcaveExpr::default(), constraints: vec![c], lower: vec![0.0], upper: vec![5.0] };
        let (rep, s) = solve_feasibility(&sub, &[2.0], &Tolerances::default()).unwrap();
        assert!(s < 0.0);
        assert!((s + 1.0).abs() < 1e-6);
        assert!(rep.solution[0] >= 0.0);
    }
}
