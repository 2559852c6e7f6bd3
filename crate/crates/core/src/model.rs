//! Network drops, channel realizations and zero-forcing precoding.
//!
//! Everything downstream of [`build_effective_gains`] works with the scalar
//! power gains in [`EffectiveGains`]: every SINR becomes a ratio of affine
//! functions of the transmit powers.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

pub use crate::linalg::CMatrix;
use crate::linalg::{dot, hermitian_solve};
use crate::math::{cos, dbm_to_watts, ln, powf, sin, sqrt};
use crate::{seed, Error};

/// Relative pivot threshold below which the precoding group counts as singular.
const ZF_PIVOT_TOL: f64 = 1e-12;
/// Number of fading redraws attempted before a singular group is reported.
const MAX_REDRAWS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        sqrt(dx * dx + dy * dy)
    }

    fn scaled(&self, c: f64) -> Point {
        Point::new(self.x * c, self.y * c)
    }
}

/// Counts and geometry of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    /// Side of the square drop area in meters.
    pub area_side: f64,
    /// MBS antenna count `M`.
    pub num_antennas: usize,
    /// Macro users `K`.
    pub num_mus: usize,
    /// Small cells `N`, each with one user.
    pub num_sbs: usize,
    /// Radius of the disc around each SBS in which its user is dropped.
    pub su_radius: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { area_side: 500.0, num_antennas: 128, num_mus: 4, num_sbs: 4, su_radius: 40.0 }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.area_side > 0.0) || !self.area_side.is_finite() {
            return Err(Error::InvalidConfig("area side must be positive"));
        }
        if !(self.su_radius > 0.0) || !self.su_radius.is_finite() {
            return Err(Error::InvalidConfig("SU drop radius must be positive"));
        }
        if self.num_mus < 1 {
            return Err(Error::InvalidConfig("at least one macro user is required"));
        }
        if self.num_antennas < 1 {
            return Err(Error::InvalidConfig("at least one MBS antenna is required"));
        }
        if self.num_mus + self.num_sbs >= self.num_antennas {
            return Err(Error::InvalidConfig("K + N must be strictly below M"));
        }
        Ok(())
    }

    /// True when `K + N > M / 4`, i.e. the array is not really "massive" for
    /// this load and zero-forcing gains will be small.
    pub fn is_heavily_loaded(&self) -> bool {
        4 * (self.num_mus + self.num_sbs) > self.num_antennas
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub area_side: f64,
    pub mbs_position: Point,
    pub sbs_positions: Vec<Point>,
    pub mu_positions: Vec<Point>,
    /// One user per SBS, same index.
    pub su_positions: Vec<Point>,
    pub num_antennas: usize,
}

impl NetworkTopology {
    pub fn num_mus(&self) -> usize {
        self.mu_positions.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.sbs_positions.len()
    }

    /// Same topology with every coordinate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> NetworkTopology {
        let s = |v: &[Point]| v.iter().map(|p| p.scaled(c)).collect();
        NetworkTopology {
            area_side: self.area_side * c,
            mbs_position: self.mbs_position.scaled(c),
            sbs_positions: s(&self.sbs_positions),
            mu_positions: s(&self.mu_positions),
            su_positions: s(&self.su_positions),
            num_antennas: self.num_antennas,
        }
    }
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Drops one network: MBS at the center, SBSs and MUs uniform over the square,
/// each SU uniform in the disc of radius `su_radius` around its SBS (clipped to
/// the square by rejection).
pub fn drop_topology(cfg: &TopologyConfig, seed: u64) -> Result<NetworkTopology, Error> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = cfg.area_side;
    let uniform_point = |rng: &mut ChaCha8Rng| Point::new(uniform01(rng) * side, uniform01(rng) * side);

    let sbs_positions: Vec<Point> = (0..cfg.num_sbs).map(|_| uniform_point(&mut rng)).collect();
    let mu_positions: Vec<Point> = (0..cfg.num_mus).map(|_| uniform_point(&mut rng)).collect();
    let su_positions = sbs_positions
        .iter()
        .map(|sbs| loop {
            let r = cfg.su_radius * sqrt(uniform01(&mut rng));
            let theta = 2.0 * core::f64::consts::PI * uniform01(&mut rng);
            let p = Point::new(sbs.x + r * cos(theta), sbs.y + r * sin(theta));
            if (0.0..=side).contains(&p.x) && (0.0..=side).contains(&p.y) {
                break p;
            }
        })
        .collect();

    Ok(NetworkTopology {
        area_side: side,
        mbs_position: Point::new(side / 2.0, side / 2.0),
        sbs_positions,
        mu_positions,
        su_positions,
        num_antennas: cfg.num_antennas,
    })
}

/// Propagation and receiver constants shared by every link.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingParams {
    /// Carrier/antenna constant, linear gain at 1 m.
    pub phi: f64,
    /// Path-loss exponent (gain falls as `d^-alpha_pl`).
    pub alpha_pl: f64,
    /// Standard deviation of `10 log10(zeta)` in dB.
    pub shadow_sigma_db: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Residual self-interference factor at full-duplex SBSs.
    pub gamma_si: f64,
    /// SINR gap between Shannon capacity and the modulation/coding in use.
    pub sinr_gap: f64,
    /// Distances are clamped to at least this many meters.
    pub d_min: f64,
}

impl Default for FadingParams {
    fn default() -> Self {
        Self {
            phi: 1.0,
            alpha_pl: 3.0,
            shadow_sigma_db: 8.0,
            noise_power: noise_power_watts(-174.0, 10e6),
            gamma_si: 1e-5,
            sinr_gap: sinr_gap_for_ber(1e-3),
            d_min: 1.0,
        }
    }
}

impl FadingParams {
    pub fn validate(&self) -> Result<(), Error> {
        let finite = [self.phi, self.alpha_pl, self.shadow_sigma_db, self.noise_power, self.gamma_si, self.sinr_gap, self.d_min];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("fading parameters"));
        }
        if !(self.phi > 0.0) {
            return Err(Error::InvalidConfig("phi must be positive"));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::InvalidConfig("noise power must be positive"));
        }
        if self.gamma_si < 0.0 {
            return Err(Error::InvalidConfig("self-interference factor must be non-negative"));
        }
        if !(self.sinr_gap > 0.0) {
            return Err(Error::InvalidConfig("SINR gap must be positive"));
        }
        if !(self.d_min > 0.0) || self.shadow_sigma_db < 0.0 {
            return Err(Error::InvalidConfig("d_min must be positive and shadow sigma non-negative"));
        }
        Ok(())
    }
}

/// Thermal noise power in watts for a PSD in dBm/Hz over `bandwidth_hz`.
pub fn noise_power_watts(psd_dbm_per_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(psd_dbm_per_hz) * bandwidth_hz
}

/// SNR gap `-2 ln(5 Pe) / 3` of uncoded QAM at bit error rate `pe`.
pub fn sinr_gap_for_ber(pe: f64) -> f64 {
    -2.0 * ln(5.0 * pe) / 3.0
}

/// `phi * zeta / d^alpha_pl` with `zeta = 10^(shadow_draw * sigma_dB / 10)`.
/// `shadow_draw` is a standard normal sample supplied by the caller.
pub fn large_scale_gain(d: f64, params: &FadingParams, shadow_draw: f64) -> Result<f64, Error> {
    if !d.is_finite() || !shadow_draw.is_finite() {
        return Err(Error::NonFinite("distance or shadow draw"));
    }
    let d = d.max(params.d_min);
    let zeta = powf(10.0, shadow_draw * params.shadow_sigma_db / 10.0);
    Ok(params.phi * zeta / powf(d, params.alpha_pl))
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// I.i.d. circularly symmetric complex Gaussian entries with unit variance.
pub fn draw_small_scale(rows: usize, cols: usize, seed: u64) -> Result<CMatrix, Error> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidConfig("small-scale fading dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols).map(|_| complex_normal(&mut rng)).collect();
    Ok(CMatrix { rows, cols, data })
}

/// Zero-forcing precoder `W = H^H (H H^H)^-1` for the stacked group `H`
/// (`L x M`), each column rescaled to unit norm.
pub fn zf_precoder(h: &CMatrix) -> Result<CMatrix, Error> {
    let (l, m) = (h.rows, h.cols);
    if l == 0 || l > m {
        return Err(Error::SingularChannel);
    }
    let mut gram = CMatrix::zeros(l, l);
    for i in 0..l {
        for j in 0..l {
            let v = h.row(i).iter().zip(h.row(j)).fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b.conj());
            gram.set(i, j, v);
        }
    }
    // G Y = H, then W = Y^H because G is Hermitian.
    let y = hermitian_solve(&gram, h, ZF_PIVOT_TOL).ok_or(Error::SingularChannel)?;
    let mut w = CMatrix::zeros(m, l);
    for k in 0..l {
        let norm = sqrt(y.row(k).iter().map(|v| v.norm_sqr()).sum::<f64>());
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::SingularChannel);
        }
        for r in 0..m {
            w.set(r, k, y.get(k, r).conj() / norm);
        }
    }
    Ok(w)
}

/// Scalar power gains consumed by every SINR expression. Cross-gain matrices
/// are indexed `[source][victim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains {
    /// `beta^m_k |h^m_k w_k|^2`.
    pub a_mu: Vec<f64>,
    /// `beta^b_n |h^b_n w^b_n|^2`.
    pub a_bh: Vec<f64>,
    /// `beta^s_n |h^s_n|^2`.
    pub a_su: Vec<f64>,
    /// SBS `n` into MU `k`, `[n][k]`.
    pub c_sbs_mu: Vec<Vec<f64>>,
    /// SBS `n'` into the backhaul receiver of SBS `n`, zero diagonal.
    pub c_sbs_sbs: Vec<Vec<f64>>,
    /// SBS `n'` into SU `n`, zero diagonal.
    pub c_sbs_su: Vec<Vec<f64>>,
    /// MBS stream of MU `k` into SU `n`, `[k][n]`.
    pub c_mbs_su_mu: Vec<Vec<f64>>,
    /// MBS backhaul stream of SBS `n'` into SU `n`, `[n'][n]`.
    pub c_mbs_su_bh: Vec<Vec<f64>>,
}

impl EffectiveGains {
    pub fn num_mus(&self) -> usize {
        self.a_mu.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.a_su.len()
    }
}

/// Single-antenna fades of every SBS-origin link.
#[derive(Debug, Clone, PartialEq)]
pub struct SbsFades {
    pub h_su: Vec<Complex64>,
    pub h_sbs_mu: Vec<Vec<Complex64>>,
    pub h_sbs_sbs: Vec<Vec<Complex64>>,
    pub h_sbs_su: Vec<Vec<Complex64>>,
}

/// Large-scale gains, small-scale fading, the precoder and the resulting
/// effective gains of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub num_antennas: usize,
    /// MBS -> MU `k`.
    pub beta_mu: Vec<f64>,
    /// MBS -> SBS `n` (backhaul).
    pub beta_bh: Vec<f64>,
    /// MBS -> SU `n`.
    pub beta_mbs_su: Vec<f64>,
    /// SBS `n` -> its own SU.
    pub beta_su: Vec<f64>,
    /// `[n][k]`, SBS `n` -> MU `k`.
    pub beta_cross_sbs_mu: Vec<Vec<f64>>,
    /// `[n'][n]`, SBS `n'` -> SBS `n`; diagonal unused and zero.
    pub beta_cross_sbs_sbs: Vec<Vec<f64>>,
    /// `[n'][n]`, SBS `n'` -> SU `n`; diagonal unused and zero.
    pub beta_cross_sbs_su: Vec<Vec<f64>>,
    /// `(K + 2N) x M`: MU rows, SBS backhaul rows, then SU rows.
    pub h_mbs: CMatrix,
    pub h_scalars: SbsFades,
    /// `M x (K + N)` zero-forcing precoder over the MU and backhaul rows.
    pub precoder: CMatrix,
    pub gains: EffectiveGains,
    /// Singular fading draws that were discarded before this one.
    pub redraws: u32,
}

impl ChannelRealization {
    pub fn num_mus(&self) -> usize {
        self.beta_mu.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.beta_su.len()
    }
}

fn square_matrix<T: Clone>(n: usize, zero: T, mut f: impl FnMut(usize, usize) -> T) -> Vec<Vec<T>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { zero.clone() } else { f(i, j) }).collect()).collect()
}

/// Builds the full channel realization of a topology. Shadowing and the SBS
/// fades come from independent streams derived from `seed`; a singular
/// precoding group triggers a redraw of the MBS fading from the next stream.
pub fn build_effective_gains(topology: &NetworkTopology, params: &FadingParams, seed: u64) -> Result<ChannelRealization, Error> {
    params.validate()?;
    let k = topology.num_mus();
    let n = topology.num_sbs();
    let m = topology.num_antennas;
    if k + n > m || k == 0 {
        return Err(Error::InvalidConfig("precoding group larger than the antenna count"));
    }

    let mut shadow_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 0));
    let mut gain = |a: &Point, b: &Point| -> Result<f64, Error> {
        let draw: f64 = StandardNormal.sample(&mut shadow_rng);
        large_scale_gain(a.distance(b), params, draw)
    };
    let mbs = topology.mbs_position;
    let sbs = &topology.sbs_positions;
    let beta_mu = topology.mu_positions.iter().map(|p| gain(&mbs, p)).collect::<Result<Vec<_>, _>>()?;
    let beta_bh = sbs.iter().map(|p| gain(&mbs, p)).collect::<Result<Vec<_>, _>>()?;
    let beta_mbs_su = topology.su_positions.iter().map(|p| gain(&mbs, p)).collect::<Result<Vec<_>, _>>()?;
    let beta_su = sbs.iter().zip(&topology.su_positions).map(|(s, u)| gain(s, u)).collect::<Result<Vec<_>, _>>()?;
    let mut beta_cross_sbs_mu = vec![vec![0.0; k]; n];
    for (i, s) in sbs.iter().enumerate() {
        for (j, u) in topology.mu_positions.iter().enumerate() {
            beta_cross_sbs_mu[i][j] = gain(s, u)?;
        }
    }
    let mut beta_cross_sbs_sbs = vec![vec![0.0; n]; n];
    let mut beta_cross_sbs_su = vec![vec![0.0; n]; n];
    for src in 0..n {
        for dst in 0..n {
            if src != dst {
                beta_cross_sbs_sbs[src][dst] = gain(&sbs[src], &sbs[dst])?;
                beta_cross_sbs_su[src][dst] = gain(&sbs[src], &topology.su_positions[dst])?;
            }
        }
    }

    let mut fade_rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, 1));
    let h_su: Vec<Complex64> = (0..n).map(|_| complex_normal(&mut fade_rng)).collect();
    let h_sbs_mu: Vec<Vec<Complex64>> = (0..n).map(|_| (0..k).map(|_| complex_normal(&mut fade_rng)).collect()).collect();
    let h_sbs_sbs = square_matrix(n, Complex64::new(0.0, 0.0), |_, _| complex_normal(&mut fade_rng));
    let h_sbs_su = square_matrix(n, Complex64::new(0.0, 0.0), |_, _| complex_normal(&mut fade_rng));

    let mut redraws = 0;
    let (h_mbs, precoder) = loop {
        let h = draw_small_scale(k + 2 * n, m, seed::derive(seed, 2 + redraws as u64))?;
        match zf_precoder(&h.row_block(0, k + n)) {
            Ok(w) => break (h, w),
            Err(Error::SingularChannel) if redraws + 1 < MAX_REDRAWS => redraws += 1,
            Err(e) => return Err(e),
        }
    };

    let stream_gain = |row: usize, col: usize| dot(h_mbs.row(row), &precoder.column(col)).norm_sqr();
    let a_mu = (0..k).map(|i| beta_mu[i] * stream_gain(i, i)).collect();
    let a_bh = (0..n).map(|i| beta_bh[i] * stream_gain(k + i, k + i)).collect();
    let a_su = (0..n).map(|i| beta_su[i] * h_su[i].norm_sqr()).collect();
    let c_sbs_mu = (0..n).map(|i| (0..k).map(|j| beta_cross_sbs_mu[i][j] * h_sbs_mu[i][j].norm_sqr()).collect()).collect();
    let c_sbs_sbs = square_matrix(n, 0.0, |s, d| beta_cross_sbs_sbs[s][d] * h_sbs_sbs[s][d].norm_sqr());
    let c_sbs_su = square_matrix(n, 0.0, |s, d| beta_cross_sbs_su[s][d] * h_sbs_su[s][d].norm_sqr());
    let c_mbs_su_mu = (0..k).map(|j| (0..n).map(|i| beta_mbs_su[i] * stream_gain(k + n + i, j)).collect()).collect();
    let c_mbs_su_bh = (0..n).map(|src| (0..n).map(|i| beta_mbs_su[i] * stream_gain(k + n + i, k + src)).collect()).collect();

    Ok(ChannelRealization {
        num_antennas: m,
        beta_mu,
        beta_bh,
        beta_mbs_su,
        beta_su,
        beta_cross_sbs_mu,
        beta_cross_sbs_sbs,
        beta_cross_sbs_su,
        h_mbs,
        h_scalars: SbsFades { h_su, h_sbs_mu, h_sbs_sbs, h_sbs_su },
        precoder,
        gains: EffectiveGains { a_mu, a_bh, a_su, c_sbs_mu, c_sbs_sbs, c_sbs_su, c_mbs_su_mu, c_mbs_su_bh },
        redraws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unshadowed() -> FadingParams {
        FadingParams { shadow_sigma_db: 0.0, ..FadingParams::default() }
    }

    #[test]
    fn path_loss_identities() {
        let p = unshadowed();
        assert_eq!(large_scale_gain(1.0, &p, 0.0).unwrap(), 1.0);
        assert!((large_scale_gain(10.0, &p, 0.0).unwrap() - 1e-3).abs() < 1e-15);
        // clamped to d_min
        assert_eq!(large_scale_gain(0.0, &p, 0.0).unwrap(), 1.0);
        // one standard deviation of shadowing is sigma dB
        let s = FadingParams::default();
        assert!((large_scale_gain(1.0, &s, 1.0).unwrap() - powf(10.0, 0.8)).abs() < 1e-12);
    }

    #[test]
    fn receiver_constants() {
        assert!((noise_power_watts(-174.0, 10e6) - 3.981e-14).abs() < 1e-16);
        assert!((sinr_gap_for_ber(1e-3) - 3.5322).abs() < 1e-4);
    }

    #[test]
    fn drops_are_deterministic_and_inside_the_area() {
        let cfg = TopologyConfig::default();
        let a = drop_topology(&cfg, 42).unwrap();
        assert_eq!(a, drop_topology(&cfg, 42).unwrap());
        assert_ne!(a, drop_topology(&cfg, 43).unwrap());
        for (s, u) in a.sbs_positions.iter().zip(&a.su_positions) {
            assert!(s.distance(u) <= cfg.su_radius + 1e-9);
        }
        for p in a.sbs_positions.iter().chain(&a.mu_positions).chain(&a.su_positions) {
            assert!((0.0..=cfg.area_side).contains(&p.x) && (0.0..=cfg.area_side).contains(&p.y));
        }
        assert_eq!(a.mbs_position, Point::new(250.0, 250.0));
    }

    #[test]
    fn invalid_loads_are_rejected() {
        let cfg = TopologyConfig { num_antennas: 8, num_mus: 4, num_sbs: 4, ..TopologyConfig::default() };
        assert!(drop_topology(&cfg, 1).is_err());
        assert!(TopologyConfig { num_antennas: 16, ..cfg }.is_heavily_loaded());
        assert!(!TopologyConfig::default().is_heavily_loaded());
    }

    #[test]
    fn zero_forcing_nulls_the_group_and_leaves_unit_columns() {
        let h = draw_small_scale(6, 16, 9).unwrap();
        let w = zf_precoder(&h).unwrap();
        for j in 0..6 {
            let col = w.column(j);
            assert!((col.iter().map(|v| v.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..6 {
                let g = dot(h.row(i), &col).norm_sqr();
                if i == j {
                    assert!(g > 1e-3);
                } else {
                    assert!(g < 1e-20, "leak {i}->{j}: {g}");
                }
            }
        }
    }

    #[test]
    fn rank_deficient_group_is_singular() {
        let mut h = draw_small_scale(3, 4, 2).unwrap();
        for c in 0..4 {
            let v = h.get(0, c);
            h.set(2, c, v);
        }
        assert_eq!(zf_precoder(&h), Err(Error::SingularChannel));
        assert_eq!(zf_precoder(&draw_small_scale(5, 4, 2).unwrap()), Err(Error::SingularChannel));
    }

    #[test]
    fn effective_gains_are_consistent_with_their_factors() {
        let topo = drop_topology(&TopologyConfig { num_antennas: 16, ..TopologyConfig::default() }, 5).unwrap();
        let ch = build_effective_gains(&topo, &FadingParams::default(), 5).unwrap();
        let g = &ch.gains;
        for n in 0..4 {
            assert!((g.a_su[n] - ch.beta_su[n] * ch.h_scalars.h_su[n].norm_sqr()).abs() <= 1e-15 * g.a_su[n]);
            assert_eq!(g.c_sbs_sbs[n][n], 0.0);
            // the MBS beams towards the other group members are nulled
            for k in 0..4 {
                assert!(dot(ch.h_mbs.row(k), &ch.precoder.column(4 + n)).norm_sqr() < 1e-20);
            }
        }
        assert_eq!(ch, build_effective_gains(&topo, &FadingParams::default(), 5).unwrap());
    }
}
