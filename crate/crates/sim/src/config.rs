//! Scenario configuration.
//!
//! Every field has a kebab-case key. Values are layered: built-in defaults,
//! then a flat `key = value` file, then `SBH_OUTPUT_DIR`, then command-line
//! flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sbh_core::baselines::SchemeId;
use sbh_core::cccp::SolverConfig;
use sbh_core::model::{FadingParams, TopologyConfig};

pub const OUTPUT_DIR_ENV: &str = "SBH_OUTPUT_DIR";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    None,
    NumMus,
    NumSbs,
    GammaSi,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::NumMus => "num_mus",
            SweepAxis::NumSbs => "num_sbs",
            SweepAxis::GammaSi => "gamma_si",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.replace('-', "_").as_str() {
            "none" => Some(SweepAxis::None),
            "num_mus" => Some(SweepAxis::NumMus),
            "num_sbs" => Some(SweepAxis::NumSbs),
            "gamma_si" => Some(SweepAxis::GammaSi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub topology: TopologyConfig,
    pub fading: FadingParams,
    pub solver: SolverConfig,
    pub sweep: SweepAxis,
    /// Ignored (a single pass) when `sweep` is `None`.
    pub sweep_values: Vec<f64>,
    pub droppings: usize,
    pub schemes: Vec<SchemeId>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads, `0` for one per core.
    pub workers: usize,
    /// Record wall time per row. Off by default so that results are
    /// byte-reproducible.
    pub timing: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            fading: FadingParams::default(),
            solver: SolverConfig::default(),
            sweep: SweepAxis::None,
            sweep_values: vec![0.0],
            droppings: 100,
            schemes: SchemeId::ALL.to_vec(),
            seed: 1,
            output_dir: PathBuf::from("out"),
            workers: 0,
            timing: false,
        }
    }
}

/// Every accepted key, in manifest order.
pub const KEYS: &[&str] = &[
    "area-side",
    "num-antennas",
    "num-mus",
    "num-sbs",
    "su-radius",
    "phi",
    "alpha-pl",
    "shadow-sigma-db",
    "noise-power",
    "gamma-si",
    "sinr-gap",
    "d-min",
    "t1-max",
    "t2-max",
    "t3-max",
    "eps1",
    "eps2",
    "eps3",
    "p-mbs-max",
    "p-sbs-max",
    "r-min-mu",
    "r-min-su",
    "start-fraction",
    "sweep",
    "sweep-values",
    "droppings",
    "schemes",
    "seed",
    "output-dir",
    "workers",
    "timing",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue { key: key.into(), value: value.into(), reason: e.to_string() })
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    let items: Vec<T> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(ConfigError::BadValue { key: key.into(), value: value.into(), reason: "empty list".into() });
    }
    Ok(items)
}

impl ScenarioConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let t = &mut self.topology;
        let f = &mut self.fading;
        let s = &mut self.solver;
        match key {
            "area-side" => t.area_side = parse_num(key, value)?,
            "num-antennas" => t.num_antennas = parse_num(key, value)?,
            "num-mus" => t.num_mus = parse_num(key, value)?,
            "num-sbs" => t.num_sbs = parse_num(key, value)?,
            "su-radius" => t.su_radius = parse_num(key, value)?,
            "phi" => f.phi = parse_num(key, value)?,
            "alpha-pl" => f.alpha_pl = parse_num(key, value)?,
            "shadow-sigma-db" => f.shadow_sigma_db = parse_num(key, value)?,
            "noise-power" => f.noise_power = parse_num(key, value)?,
            "gamma-si" => f.gamma_si = parse_num(key, value)?,
            "sinr-gap" => f.sinr_gap = parse_num(key, value)?,
            "d-min" => f.d_min = parse_num(key, value)?,
            "t1-max" => s.t1_max = parse_num(key, value)?,
            "t2-max" => s.t2_max = parse_num(key, value)?,
            "t3-max" => s.t3_max = parse_num(key, value)?,
            "eps1" => s.eps1 = parse_num(key, value)?,
            "eps2" => s.eps2 = parse_num(key, value)?,
            "eps3" => s.eps3 = parse_num(key, value)?,
            "p-mbs-max" => s.limits.p_mbs_max = parse_num(key, value)?,
            "p-sbs-max" => s.limits.p_sbs_max = parse_num(key, value)?,
            "r-min-mu" => s.limits.r_min_mu = parse_num(key, value)?,
            "r-min-su" => s.limits.r_min_su = parse_num(key, value)?,
            "start-fraction" => s.start_fraction = parse_num(key, value)?,
            "sweep" => {
                self.sweep = SweepAxis::parse(value).ok_or_else(|| ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    reason: "expected none, num_mus, num_sbs or gamma_si".into(),
                })?
            }
            "sweep-values" => self.sweep_values = parse_list(key, value, |v| parse_num(key, v))?,
            "droppings" => self.droppings = parse_num(key, value)?,
            "schemes" => {
                self.schemes = parse_list(key, value, |v| {
                    SchemeId::from_name(v).ok_or_else(|| ConfigError::BadValue {
                        key: key.into(),
                        value: v.into(),
                        reason: "unknown scheme".into(),
                    })
                })?
            }
            "seed" => self.seed = parse_num(key, value)?,
            "output-dir" => self.output_dir = PathBuf::from(value),
            "workers" => self.workers = parse_num(key, value)?,
            "timing" => self.timing = parse_num(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies a flat `key = value` document. `#` starts a comment; keys may
    /// use `_` in place of `-`.
    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(&k.trim().replace('_', "-"), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        self.apply_str(&text)
    }

    /// Takes the output directory from `SBH_OUTPUT_DIR` when it is set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    /// The values actually iterated: the list for a real sweep, one dummy
    /// point otherwise.
    pub fn effective_sweep_values(&self) -> Vec<f64> {
        match self.sweep {
            SweepAxis::None => vec![0.0],
            _ => self.sweep_values.clone(),
        }
    }

    /// Topology and fading parameters at one sweep point.
    pub fn at_sweep_value(&self, value: f64) -> (TopologyConfig, FadingParams) {
        let mut topo = self.topology.clone();
        let mut fading = self.fading.clone();
        match self.sweep {
            SweepAxis::None => {}
            SweepAxis::NumMus => topo.num_mus = value as usize,
            SweepAxis::NumSbs => topo.num_sbs = value as usize,
            SweepAxis::GammaSi => fading.gamma_si = value,
        }
        (topo, fading)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: sbh_core::Error| ConfigError::Invalid(e.to_string());
        if self.droppings == 0 {
            return Err(ConfigError::Invalid("droppings must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(ConfigError::Invalid("no scheme selected".into()));
        }
        if self.sweep != SweepAxis::None && self.sweep_values.is_empty() {
            return Err(ConfigError::Invalid("sweep values are empty".into()));
        }
        if matches!(self.sweep, SweepAxis::NumMus | SweepAxis::NumSbs) && self.sweep_values.iter().any(|v| !(v.fract() == 0.0 && *v >= 0.0))
        {
            return Err(ConfigError::Invalid("user and cell counts must be non-negative integers".into()));
        }
        self.solver.validate().map_err(invalid)?;
        for v in self.effective_sweep_values() {
            let (topo, fading) = self.at_sweep_value(v);
            topo.validate().map_err(invalid)?;
            fading.validate().map_err(invalid)?;
        }
        Ok(())
    }

    /// `key = value` lines for every key, readable back by
    /// [`ScenarioConfig::apply_str`].
    pub fn to_key_values(&self) -> String {
        let t = &self.topology;
        let f = &self.fading;
        let s = &self.solver;
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let schemes = self.schemes.iter().map(|s| s.name()).collect::<Vec<_>>().join(",");
        let values: [String; 31] = [
            t.area_side.to_string(),
            t.num_antennas.to_string(),
            t.num_mus.to_string(),
            t.num_sbs.to_string(),
            t.su_radius.to_string(),
            f.phi.to_string(),
            f.alpha_pl.to_string(),
            f.shadow_sigma_db.to_string(),
            f.noise_power.to_string(),
            f.gamma_si.to_string(),
            f.sinr_gap.to_string(),
            f.d_min.to_string(),
            s.t1_max.to_string(),
            s.t2_max.to_string(),
            s.t3_max.to_string(),
            s.eps1.to_string(),
            s.eps2.to_string(),
            s.eps3.to_string(),
            s.limits.p_mbs_max.to_string(),
            s.limits.p_sbs_max.to_string(),
            s.limits.r_min_mu.to_string(),
            s.limits.r_min_su.to_string(),
            s.start_fraction.to_string(),
            self.sweep.name().to_string(),
            join(&self.sweep_values),
            self.droppings.to_string(),
            schemes,
            self.seed.to_string(),
            self.output_dir.display().to_string(),
            self.workers.to_string(),
            self.timing.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_str("sweep = gamma_si\nsweep-values = 1e-9, 1e-3\nschemes = hd_mmimo\nnum_mus = 2 # comment\n").unwrap();
        let mut back = ScenarioConfig { seed: 99, ..ScenarioConfig::default() };
        back.apply_str(&cfg.to_key_values()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.sweep_values, vec![1e-9, 1e-3]);
        assert_eq!(cfg.topology.num_mus, 2);
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_key_values();
        assert_eq!(text.lines().count(), KEYS.len());
        let mut other = ScenarioConfig::default();
        for line in text.lines() {
            let (k, v) = line.split_once(" = ").unwrap();
            other.set(k, v).unwrap();
        }
    }

    #[test]
    fn bad_input_is_reported() {
        let mut cfg = ScenarioConfig::default();
        assert_eq!(cfg.set("nope", "1"), Err(ConfigError::UnknownKey("nope".into())));
        assert!(matches!(cfg.set("seed", "x"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(cfg.set("schemes", "a,b"), Err(ConfigError::BadValue { .. })));
        assert_eq!(cfg.apply_str("seed 3"), Err(ConfigError::Syntax { line: 1 }));
    }

    #[test]
    fn validation_checks_every_sweep_point() {
        let mut cfg = ScenarioConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.droppings = 0;
        assert!(cfg.validate().is_err());
        cfg.droppings = 1;
        cfg.sweep = SweepAxis::NumMus;
        cfg.sweep_values = vec![2.0, 200.0];
        assert!(cfg.validate().is_err());
        cfg.sweep_values = vec![1.5];
        assert!(cfg.validate().is_err());
    }
}
