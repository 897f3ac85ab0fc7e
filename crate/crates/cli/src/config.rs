//! Experiment configuration: a flat TOML table with a schema version.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use trapwalk::{BiasLaw, OffspringLaw};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Gamma,
    TrapTail,
    TrapTimeTail,
    Walk,
    Displacement,
    Dichotomy,
    PairConstants,
    SnapshotStability,
    Constants,
    DumpTrap,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Gamma => "gamma",
            Kind::TrapTail => "trap-tail",
            Kind::TrapTimeTail => "trap-time-tail",
            Kind::Walk => "walk",
            Kind::Displacement => "displacement",
            Kind::Dichotomy => "dichotomy",
            Kind::PairConstants => "pair-constants",
            Kind::SnapshotStability => "snapshot-stability",
            Kind::Constants => "constants",
            Kind::DumpTrap => "dump-trap",
        }
    }
}

/// Every knob of every experiment; each experiment reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Offspring probabilities keyed by child count.
    pub offspring: BTreeMap<String, f64>,
    /// `[value, probability]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_atoms: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_uniform: Option<[f64; 2]>,
    #[serde(default = "d_replicas")]
    pub replicas: u64,
    #[serde(default = "d_samples")]
    pub samples: u64,
    #[serde(default = "d_ns")]
    pub ns: Vec<u32>,
    #[serde(default = "d_k")]
    pub k: u32,
    #[serde(default = "d_k_stop")]
    pub k_stop: u32,
    #[serde(default = "d_budget")]
    pub budget: u64,
    #[serde(default = "one_u32")]
    pub tau_reps: u32,
    /// Trap entrance at which snapshots are taken.
    #[serde(default = "d_snapshot_n")]
    pub snapshot_n: usize,
    #[serde(default = "one_u32")]
    pub traps_per_snapshot: u32,
    #[serde(default = "d_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default = "d_top_fraction")]
    pub top_fraction: f64,
    #[serde(default = "d_d2_ks")]
    pub d2_ks: Vec<u32>,
    /// Holding-time threshold for the dichotomy.
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    /// Base of the lattice bias law in the dichotomy.
    #[serde(default = "d_lattice_beta")]
    pub lattice_beta: f64,
    /// Walks used for the entrance rate.
    #[serde(default = "d_psi_replicas")]
    pub psi_replicas: u64,
    #[serde(default = "d_psi_n")]
    pub psi_n: u32,
    #[serde(default = "d_horizon")]
    pub horizon: u64,
    /// Holding-time quantile whose deep-fall average enters the scale
    /// constant; the `quantiles` ladder is reported alongside.
    #[serde(default = "d_xi_quantile")]
    pub xi_quantile: f64,
    /// Radius whose second-constant estimate enters the scale constant.
    #[serde(default = "d_xi_k")]
    pub xi_k: u32,
    /// Accept displacement grids below the recommended size.
    #[serde(default)]
    pub relaxed: bool,
    /// Serialized backbone/trap pair read by `pair-constants`; without it
    /// `replicas` late snapshots are sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Traps written by `dump-trap`.
    #[serde(default)]
    pub count: u64,
}

fn one() -> usize {
    1
}
fn one_u32() -> u32 {
    1
}
fn d_replicas() -> u64 {
    500
}
fn d_samples() -> u64 {
    1_000_000
}
fn d_ns() -> Vec<u32> {
    vec![64, 128, 256, 512]
}
fn d_k() -> u32 {
    12
}
fn d_k_stop() -> u32 {
    trapwalk::walk::DEFAULT_K_STOP
}
fn d_budget() -> u64 {
    10_000_000_000
}
fn d_snapshot_n() -> usize {
    200
}
fn d_quantiles() -> Vec<f64> {
    vec![0.95, 0.99, 0.995, 0.999]
}
fn d_top_fraction() -> f64 {
    trapwalk::analysis::DEFAULT_TOP_FRACTION
}
fn d_d2_ks() -> Vec<u32> {
    vec![4, 5, 6, 7]
}
fn d_threshold() -> f64 {
    100.0
}
fn d_lattice_beta() -> f64 {
    2.0
}
fn d_xi_quantile() -> f64 {
    0.99
}
fn d_xi_k() -> u32 {
    4
}
fn d_psi_replicas() -> u64 {
    40
}
fn d_psi_n() -> u32 {
    10_000
}
fn d_horizon() -> u64 {
    trapwalk::walk::DEFAULT_HORIZON
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.field, self.message)
        }
    }
}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.to_string(), message: message.into() }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad("", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad("schema_version", format!("expected {SCHEMA_VERSION}, found {}", self.schema_version)));
        }
        self.offspring_law()?;
        self.bias_law()?;
        if self.workers == 0 {
            return Err(bad("workers", "must be at least 1"));
        }
        if self.ns.is_empty() || self.ns.iter().any(|&n| n == 0) || self.ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("ns", "must be a non-empty increasing list of positive depths"));
        }
        if self.k == 0 || self.k > trapwalk::walk::MAX_SNAPSHOT_RADIUS {
            return Err(bad("k", format!("must lie in 1..={}", trapwalk::walk::MAX_SNAPSHOT_RADIUS)));
        }
        if self.k_stop == 0 {
            return Err(bad("k_stop", "must be positive"));
        }
        if self.budget == 0 {
            return Err(bad("budget", "must be positive"));
        }
        if self.snapshot_n == 0 {
            return Err(bad("snapshot_n", "must be positive"));
        }
        if self.traps_per_snapshot == 0 {
            return Err(bad("traps_per_snapshot", "must be positive"));
        }
        for (i, q) in self.quantiles.iter().enumerate() {
            if !(*q > 0.9 && *q < 0.9999) {
                return Err(bad(&format!("quantiles[{i}]"), format!("{q} outside (0.9, 0.9999)")));
            }
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 0.5) {
            return Err(bad("top_fraction", format!("{} outside (0, 0.5]", self.top_fraction)));
        }
        for (i, k) in self.d2_ks.iter().enumerate() {
            if !(4..=12).contains(k) {
                return Err(bad(&format!("d2_ks[{i}]"), format!("{k} outside 4..=12")));
            }
        }
        if !(self.xi_quantile > 0.9 && self.xi_quantile < 0.9999) {
            return Err(bad("xi_quantile", format!("{} outside (0.9, 0.9999)", self.xi_quantile)));
        }
        if !(4..=12).contains(&self.xi_k) {
            return Err(bad("xi_k", format!("{} outside 4..=12", self.xi_k)));
        }
        if !(self.threshold > 0.0) {
            return Err(bad("threshold", "must be positive"));
        }
        if !(self.lattice_beta > 1.0) {
            return Err(bad("lattice_beta", "must exceed 1"));
        }
        if self.psi_n == 0 {
            return Err(bad("psi_n", "must be positive"));
        }
        Ok(())
    }

    pub fn offspring_law(&self) -> Result<OffspringLaw, ConfigError> {
        let mut pairs = Vec::with_capacity(self.offspring.len());
        for (key, &p) in &self.offspring {
            let k: usize = key
                .parse()
                .map_err(|_| bad(&format!("offspring.{key}"), "keys must be child counts"))?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(bad(&format!("offspring.{key}"), format!("probability {p} is not in [0, 1]")));
            }
            pairs.push((k, p));
        }
        OffspringLaw::from_pairs(&pairs).map_err(|e| bad("offspring", e.to_string()))
    }

    pub fn bias_law(&self) -> Result<BiasLaw, ConfigError> {
        match (&self.bias_atoms, &self.bias_uniform) {
            (Some(atoms), None) => {
                for (i, a) in atoms.iter().enumerate() {
                    if !(a[0] > 1.0 && a[0].is_finite()) {
                        return Err(bad(&format!("bias_atoms[{i}]"), format!("bias {} must exceed 1", a[0])));
                    }
                    if !(a[1] > 0.0 && a[1] <= 1.0) {
                        return Err(bad(&format!("bias_atoms[{i}]"), format!("probability {} outside (0, 1]", a[1])));
                    }
                }
                BiasLaw::atoms(atoms.iter().map(|a| (a[0], a[1])).collect()).map_err(|e| bad("bias_atoms", e.to_string()))
            }
            (None, Some([lo, hi])) => BiasLaw::uniform(*lo, *hi).map_err(|e| bad("bias_uniform", e.to_string())),
            (Some(_), Some(_)) => Err(bad("bias_uniform", "give either bias_atoms or bias_uniform, not both")),
            (None, None) => Err(bad("bias_atoms", "a bias law is required")),
        }
    }

    /// The config with run-placement fields cleared, as hashed.
    fn canonical(&self) -> Self {
        Self { workers: 1, out: None, ..self.clone() }
    }

    /// Hex SHA-256 of the canonical TOML form. Worker count and output path
    /// do not enter.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().to_toml().as_bytes());
        hex(&digest)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
