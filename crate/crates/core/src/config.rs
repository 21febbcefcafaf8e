//! Scenario configuration.
//!
//! A [`ScenarioConfig`] fully parameterizes one simulated world. Missing
//! fields in a configuration file take the defaults of the reference setup:
//! 100 ms transmission period, 100 resources, SPS counter in `[5, 15]`,
//! one-shot counter in `[2, 6]` (disabled), keep probability 0.8.
//!
//! Configuration files are TOML with `lower_snake_case` keys matching the
//! struct fields. Command-line overrides (`key=value`) are applied on top of a
//! loaded config before validation, see [`ScenarioConfig::apply_override`].

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("malformed override `{0}`, expected key=value")]
    MalformedOverride(String),
    #[error("failed to parse configuration: {0}")]
    Parse(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

/// Closed integer interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct IntRange {
    pub lo: u32,
    pub hi: u32,
}

impl IntRange {
    pub const fn new(lo: u32, hi: u32) -> Self {
        IntRange { lo, hi }
    }

    /// Number of values in the interval.
    pub fn len(&self) -> u32 {
        self.hi.saturating_sub(self.lo) + 1
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, v: u32) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// Uniform draw over both endpoints. The interval must be non-empty.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.lo..=self.hi)
    }

    fn check_positive(&self, field: &str) -> Result<(), ConfigError> {
        if self.lo > self.hi {
            return Err(ConfigError::invalid(field, "lower bound exceeds upper"));
        }
        if self.lo == 0 {
            return Err(ConfigError::invalid(field, "lower bound must be at least 1"));
        }
        Ok(())
    }
}

impl From<[u32; 2]> for IntRange {
    fn from([lo, hi]: [u32; 2]) -> Self {
        IntRange { lo, hi }
    }
}

impl From<IntRange> for [u32; 2] {
    fn from(r: IntRange) -> Self {
        [r.lo, r.hi]
    }
}

impl fmt::Display for IntRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// How long an attacker holds a jammed resource before reselecting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttackerInterval {
    Fixed(u32),
    Range(IntRange),
}

impl AttackerInterval {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            AttackerInterval::Fixed(k) => k,
            AttackerInterval::Range(r) => r.sample(rng),
        }
    }

    pub fn max(&self) -> u32 {
        match *self {
            AttackerInterval::Fixed(k) => k,
            AttackerInterval::Range(r) => r.hi,
        }
    }
}

impl fmt::Display for AttackerInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackerInterval::Fixed(k) => write!(f, "{k}"),
            AttackerInterval::Range(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPolicy {
    /// Uniform over all resources of the period.
    Uniform,
    /// Uniform over the sensed-free candidates, topped up to the minimum pool size.
    Sensing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_targets: usize,
    pub num_attackers: usize,
    pub num_resources: usize,
    pub period_ms: u32,
    pub sps_range: IntRange,
    pub oneshot_enabled: bool,
    pub oneshot_range: IntRange,
    /// Probability of keeping the current resource when the SPS counter expires.
    pub keep_prob: f64,
    pub attacker_interval: AttackerInterval,
    pub sensing_window_periods: usize,
    pub selection_policy: SelectionPolicy,
    /// Policy for picking one-shot resources.
    pub oneshot_policy: SelectionPolicy,
    pub candidate_min_fraction: f64,
    /// Record any occupied resource in the usage ledgers instead of only
    /// decodable (single-transmitter) ones.
    pub sense_any_energy: bool,
    /// On an SPS-expiry keep, decrement the one-shot counter once more.
    pub extra_co_decrement_on_keep: bool,
    pub sim_periods: u64,
    pub warmup_periods: u64,
    pub master_seed: u64,
    pub replications: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            num_targets: 5,
            num_attackers: 0,
            num_resources: 100,
            period_ms: 100,
            sps_range: IntRange::new(5, 15),
            oneshot_enabled: false,
            oneshot_range: IntRange::new(2, 6),
            keep_prob: 0.8,
            attacker_interval: AttackerInterval::Range(IntRange::new(5, 15)),
            sensing_window_periods: 10,
            selection_policy: SelectionPolicy::Sensing,
            oneshot_policy: SelectionPolicy::Sensing,
            candidate_min_fraction: 0.2,
            sense_any_energy: false,
            extra_co_decrement_on_keep: false,
            sim_periods: 1_000_000,
            warmup_periods: 10,
            master_seed: 42,
            replications: 4,
        }
    }
}

impl ScenarioConfig {
    /// Reselection probability `1 - keep_prob`.
    pub fn reselect_prob(&self) -> f64 {
        1.0 - self.keep_prob
    }

    /// Number of measured (post-warmup) periods.
    pub fn measured_periods(&self) -> u64 {
        self.sim_periods.saturating_sub(self.warmup_periods)
    }

    /// Checks every invariant and returns the config unchanged on success.
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.num_targets == 0 {
            return Err(ConfigError::invalid("num_targets", "must be at least 1"));
        }
        if self.num_resources == 0 {
            return Err(ConfigError::invalid("num_resources", "must be at least 1"));
        }
        if self.period_ms == 0 {
            return Err(ConfigError::invalid("period_ms", "must be positive"));
        }
        self.sps_range.check_positive("sps_range")?;
        self.oneshot_range.check_positive("oneshot_range")?;
        match self.attacker_interval {
            AttackerInterval::Fixed(0) => {
                return Err(ConfigError::invalid("attacker_interval", "must be at least 1"))
            }
            AttackerInterval::Fixed(_) => {}
            AttackerInterval::Range(r) => r.check_positive("attacker_interval")?,
        }
        if !(0.0..=1.0).contains(&self.keep_prob) {
            return Err(ConfigError::invalid("keep_prob", "must lie in [0, 1]"));
        }
        if self.sensing_window_periods == 0 {
            return Err(ConfigError::invalid("sensing_window_periods", "must be at least 1"));
        }
        if self.warmup_periods < self.sensing_window_periods as u64 {
            return Err(ConfigError::invalid(
                "warmup_periods",
                "must be at least sensing_window_periods",
            ));
        }
        if !(self.candidate_min_fraction > 0.0 && self.candidate_min_fraction <= 1.0) {
            return Err(ConfigError::invalid("candidate_min_fraction", "must lie in (0, 1]"));
        }
        if self.replications == 0 {
            return Err(ConfigError::invalid("replications", "must be at least 1"));
        }
        Ok(self)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Serializes to TOML. Seeds above `i64::MAX` cannot be represented.
    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Loads a TOML file; fields not present keep their defaults.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Applies one `key=value` override. The value is read as JSON
    /// (`5`, `0.8`, `[2,6]`, `true`, `"uniform"`); anything that does not
    /// parse is taken as a bare string, so `selection_policy=uniform` works.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::MalformedOverride(assignment.to_string()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::MalformedOverride(assignment.to_string()));
        }
        self.set_value(key, parse_override_value(raw.trim()))
    }

    /// Sets one field from a JSON value.
    pub fn set_value(&mut self, key: &str, value: serde_json::Value) -> Result<(), ConfigError> {
        let mut doc = serde_json::to_value(&*self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let obj = doc.as_object_mut().expect("config serializes to an object");
        if !obj.contains_key(key) {
            return Err(ConfigError::invalid(key, "unknown configuration key"));
        }
        obj.insert(key.to_string(), value);
        *self = serde_json::from_value(doc).map_err(|e| ConfigError::invalid(key, e.to_string()))?;
        Ok(())
    }
}

pub(crate) fn parse_override_value(raw: &str) -> serde_json::Value {
    serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()))
}
