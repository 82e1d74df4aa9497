use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::engine::{
    SimulationPolicy, DEFAULT_OFFSPRING_TRUNCATION_EPSILON, DEFAULT_POPULATION_CAP,
    DEFAULT_PRUNE_EPSILON,
};
use crate::models::OffspringLaw;
use crate::verify::CoefficientTail;

pub const SCHEMA_VERSION: u32 = 1;

/// One experiment: a law, its parameters, the simulation policy and the checks to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: String,
    #[serde(default)]
    pub description: String,
    pub theta: f64,
    pub alpha: f64,
    pub replicates: u64,
    #[serde(with = "seed_format")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub law: OffspringLaw,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub checks: ChecksConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub max_generation: usize,
    pub horizon: usize,
    #[serde(default = "default_lags")]
    pub lags: Vec<usize>,
    #[serde(default = "default_prune_epsilon")]
    pub prune_epsilon: f64,
    #[serde(default = "default_population_cap")]
    pub population_cap: usize,
    #[serde(default = "default_offspring_truncation_epsilon")]
    pub offspring_truncation_epsilon: f64,
}

fn default_lags() -> Vec<usize> {
    vec![0]
}

fn default_prune_epsilon() -> f64 {
    DEFAULT_PRUNE_EPSILON
}

fn default_population_cap() -> usize {
    DEFAULT_POPULATION_CAP
}

fn default_offspring_truncation_epsilon() -> f64 {
    DEFAULT_OFFSPRING_TRUNCATION_EPSILON
}

impl PolicyConfig {
    pub fn new(max_generation: usize, horizon: usize, lags: Vec<usize>) -> Self {
        Self {
            max_generation,
            horizon,
            lags,
            prune_epsilon: DEFAULT_PRUNE_EPSILON,
            population_cap: DEFAULT_POPULATION_CAP,
            offspring_truncation_epsilon: DEFAULT_OFFSPRING_TRUNCATION_EPSILON,
        }
    }

    pub fn simulation_policy(&self) -> SimulationPolicy {
        SimulationPolicy {
            max_generation: self.max_generation,
            horizon: self.horizon,
            prune_epsilon: self.prune_epsilon,
            population_cap: self.population_cap,
            offspring_truncation_epsilon: self.offspring_truncation_epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub cf_sup: f64,
    pub tail_ratio: f64,
    pub tail_window: (f64, f64),
    pub hill: f64,
    pub hill_top_fraction: f64,
    pub series_constant: f64,
    pub series_top_fraction: f64,
    pub mean_z: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cf_sup: 0.05,
            tail_ratio: 0.15,
            tail_window: (0.99, 0.999),
            hill: 0.1,
            hill_top_fraction: 0.01,
            series_constant: 0.2,
            series_top_fraction: 0.005,
            mean_z: 5.0,
        }
    }
}

/// Symmetric equispaced grid on `[-half_width, half_width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: crate::stablelim::GRID_HALF_WIDTH,
            points: crate::stablelim::GRID_POINTS,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        crate::stablelim::grid(self.half_width, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub coefficients: Vec<f64>,
    pub tail: CoefficientTail,
}

impl SeriesConfig {
    /// The first `len` coefficients of the continued sequence.
    pub fn expand(&self, len: usize) -> Vec<f64> {
        let a = &self.coefficients;
        (0..len)
            .map(|j| match self.tail {
                _ if j < a.len() => a[j],
                CoefficientTail::Zero => 0.0,
                CoefficientTail::Constant => a[a.len() - 1],
                CoefficientTail::Periodic => a[j % a.len()],
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    /// Increments `W_{k+1} - W_k` and `W_k(alpha theta)` are checked for `k <= this`.
    pub martingale_generations: Option<usize>,
    pub tail_ratio: bool,
    pub tail_index: bool,
    pub mixture: bool,
    /// Cramér-Wold projections over the configured lags.
    pub fdd_betas: Vec<Vec<f64>>,
    pub series: Option<SeriesConfig>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            martingale_generations: Some(10),
            tail_ratio: false,
            tail_index: false,
            mixture: false,
            fdd_betas: Vec::new(),
            series: None,
        }
    }
}

mod seed_format {
    use super::*;

    /// Seeds above `i64::MAX` are written as strings, which TOML integers cannot hold.
    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Int(v) => u64::try_from(v).map_err(serde::de::Error::custom),
            Raw::Text(t) => {
                let t = t.trim();
                let parsed = match t.strip_prefix("0x") {
                    Some(hex) => u64::from_str_radix(hex, 16),
                    None => t.parse(),
                };
                parsed.map_err(serde::de::Error::custom)
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.replicates < 1 {
            return fail("replicates must be at least 1".into());
        }
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return fail(format!("alpha = {} is outside (1, 2)", self.alpha));
        }
        if !self.theta.is_finite() {
            return fail(format!("theta = {} is not finite", self.theta));
        }
        self.law
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.policy
            .simulation_policy()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let p = &self.policy;
        if p.lags.is_empty() {
            return fail("lags must not be empty".into());
        }
        if let Some(r) = p.lags.iter().find(|&&r| r > p.horizon) {
            return fail(format!("lag {r} exceeds horizon {}", p.horizon));
        }
        if let Some(k) = self.checks.martingale_generations {
            if k + 1 > p.max_generation {
                return fail(format!(
                    "martingale checks up to generation {} need max_generation >= {}",
                    k,
                    k + 1
                ));
            }
        }
        if let Some(b) = self.checks.fdd_betas.iter().find(|b| b.len() != p.lags.len()) {
            return fail(format!(
                "fdd betas {b:?} do not match the {} configured lags",
                p.lags.len()
            ));
        }
        if let Some(series) = &self.checks.series {
            if series.coefficients.is_empty() {
                return fail("series coefficients must not be empty".into());
            }
            if series.coefficients.len() > p.max_generation {
                return fail("more series coefficients than increments".into());
            }
            if series.coefficients.iter().any(|a| !a.is_finite()) {
                return fail("series coefficients must be finite".into());
            }
        }
        if self.grid.points < 3 || self.grid.points.is_multiple_of(2) || !(self.grid.half_width > 0.0) {
            return fail("grid needs an odd number (>= 3) of points and a positive half width".into());
        }
        let t = &self.tolerances;
        let (lo, hi) = t.tail_window;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return fail(format!("tail window ({lo}, {hi}) must satisfy 0 < lo < hi < 1"));
        }
        for (name, f) in [("hill_top_fraction", t.hill_top_fraction), ("series_top_fraction", t.series_top_fraction)] {
            if !(f > 0.0 && f <= 0.2) {
                return fail(format!("{name} = {f} is outside (0, 0.2]"));
            }
        }
        Ok(())
    }

    /// SHA-256 over every field that affects results (the description and
    /// output directory are excluded).
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.description.clear();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
