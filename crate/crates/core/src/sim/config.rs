use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::FadingModel;
use crate::detect::DetectorKind;
use crate::modem::max_mcs;

/// Largest supported user count; keeps joint constellations enumerable.
pub const MAX_USERS: usize = 8;
pub const MAX_RX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RaMode {
    Static(usize),
    Adaptive,
}

impl fmt::Display for RaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RaMode::Static(m) => write!(f, "static:{m}"),
            RaMode::Adaptive => f.write_str("adaptive"),
        }
    }
}

impl FromStr for RaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("adaptive") {
            return Ok(RaMode::Adaptive);
        }
        s.strip_prefix("static:")
            .and_then(|m| m.parse().ok())
            .map(RaMode::Static)
            .ok_or_else(|| format!("expected \"adaptive\" or \"static:<mcs>\", got {s:?}"))
    }
}

impl Serialize for RaMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RaMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_rx: usize,
    pub n_users: usize,
    pub detector: DetectorKind,
    pub ra_mode: RaMode,
    pub snr_sweep: Vec<f64>,
    pub frames_per_point: usize,
    pub seed: u64,
    #[serde(default)]
    pub per_user_snr_offset_db: Vec<f64>,
    #[serde(default)]
    pub channel: FadingModel,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("ZF needs n_rx >= n_users (n_rx = {n_rx}, n_users = {n_users})")]
    Rank { n_rx: usize, n_users: usize },
    #[error("n_users must be in 1..={MAX_USERS}, got {0}")]
    Users(usize),
    #[error("n_rx must be in 1..={MAX_RX}, got {0}")]
    Rx(usize),
    #[error("frames_per_point must be at least 1")]
    NoFrames,
    #[error("snr_sweep must be a non-empty list of finite values")]
    Sweep,
    #[error("SNR {0} dB is outside [-100, 200]")]
    SnrRange(f64),
    #[error("per_user_snr_offset_db has {got} entries for {n_users} users")]
    Offsets { got: usize, n_users: usize },
    #[error("unknown MCS {0}")]
    Mcs(usize),
}

impl ConfigError {
    /// Short machine-readable reason.
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Rank { .. } => "rank",
            ConfigError::Users(_) | ConfigError::Rx(_) => "dimension",
            ConfigError::NoFrames => "frames",
            ConfigError::Sweep | ConfigError::SnrRange(_) => "snr",
            ConfigError::Offsets { .. } => "offsets",
            ConfigError::Mcs(_) => "mcs",
        }
    }
}

pub fn check_snr(snr_db: f64) -> Result<(), ConfigError> {
    if !snr_db.is_finite() {
        return Err(ConfigError::Sweep);
    }
    if !(-100.0..=200.0).contains(&snr_db) {
        return Err(ConfigError::SnrRange(snr_db));
    }
    Ok(())
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_users == 0 || self.n_users > MAX_USERS {
            return Err(ConfigError::Users(self.n_users));
        }
        if self.n_rx == 0 || self.n_rx > MAX_RX {
            return Err(ConfigError::Rx(self.n_rx));
        }
        if self.detector == DetectorKind::Zf && self.n_rx < self.n_users {
            return Err(ConfigError::Rank {
                n_rx: self.n_rx,
                n_users: self.n_users,
            });
        }
        if self.frames_per_point == 0 {
            return Err(ConfigError::NoFrames);
        }
        if self.snr_sweep.is_empty() {
            return Err(ConfigError::Sweep);
        }
        for &s in &self.snr_sweep {
            check_snr(s)?;
        }
        if !self.per_user_snr_offset_db.is_empty() && self.per_user_snr_offset_db.len() != self.n_users {
            return Err(ConfigError::Offsets {
                got: self.per_user_snr_offset_db.len(),
                n_users: self.n_users,
            });
        }
        if self.per_user_snr_offset_db.iter().any(|o| !o.is_finite()) {
            return Err(ConfigError::Sweep);
        }
        if let RaMode::Static(m) = self.ra_mode {
            if m > max_mcs() {
                return Err(ConfigError::Mcs(m));
            }
        }
        Ok(())
    }

    /// Per-user offsets, zero-filled when not configured.
    pub fn offsets_db(&self) -> Vec<f64> {
        if self.per_user_snr_offset_db.is_empty() {
            vec![0.0; self.n_users]
        } else {
            self.per_user_snr_offset_db.clone()
        }
    }
}

/// A configuration with a name, one curve of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub name: String,
    #[serde(flatten)]
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub name: String,
    pub arms: Vec<Arm>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Arms(Vec<Arm>),
    Single(SimConfig),
}

impl Experiment {
    /// Parses a config file holding either one configuration or an array of
    /// named arms.
    pub fn from_json(name: &str, s: &str) -> Result<Self, serde_json::Error> {
        let arms = match serde_json::from_str(s)? {
            ConfigFile::Arms(a) => a,
            ConfigFile::Single(config) => vec![Arm {
                name: name.to_string(),
                config,
            }],
        };
        Ok(Self {
            name: name.to_string(),
            arms,
        })
    }
}
