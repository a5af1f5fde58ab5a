//! Wire types of the live service: control messages from clients and the
//! events streamed back.

use nlmimo::channel::FadingModel;
use nlmimo::detect::DetectorKind;
use nlmimo::sim::config::check_snr;
use nlmimo::sim::{ConfigError, RaMode, SimConfig};
use serde::{Deserialize, Serialize};

/// Parameters of the live simulation. Served as JSON by `GET /state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub n_rx: usize,
    pub n_users: usize,
    pub detector: DetectorKind,
    pub ra_mode: RaMode,
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub per_user_snr_offset_db: Vec<f64>,
    #[serde(default)]
    pub channel: FadingModel,
}

impl LiveConfig {
    /// Takes the first SNR point of a batch configuration.
    pub fn from_sim(cfg: &SimConfig) -> Self {
        Self {
            n_rx: cfg.n_rx,
            n_users: cfg.n_users,
            detector: cfg.detector,
            ra_mode: cfg.ra_mode,
            snr_db: cfg.snr_sweep.first().copied().unwrap_or(10.0),
            seed: cfg.seed,
            per_user_snr_offset_db: cfg.per_user_snr_offset_db.clone(),
            channel: cfg.channel,
        }
    }

    /// Single-point batch configuration with the same frame semantics.
    pub fn to_sim(&self, frames_per_point: usize) -> SimConfig {
        SimConfig {
            n_rx: self.n_rx,
            n_users: self.n_users,
            detector: self.detector,
            ra_mode: self.ra_mode,
            snr_sweep: vec![self.snr_db],
            frames_per_point,
            seed: self.seed,
            per_user_snr_offset_db: self.per_user_snr_offset_db.clone(),
            channel: self.channel,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.to_sim(1).validate()
    }

    /// Same topology, so statistics windows stay meaningful.
    pub fn same_topology(&self, other: &LiveConfig) -> bool {
        self.n_rx == other.n_rx && self.n_users == other.n_users
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum ControlMessage {
    SetDetector(DetectorKind),
    SetRaMode(RaMode),
    SetStreams(usize),
    SetRxAntennas(usize),
    SetSnr(f64),
    Pause,
    Resume,
    ResetStats,
}

impl ControlMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ControlMessage::SetDetector(_) => "SetDetector",
            ControlMessage::SetRaMode(_) => "SetRaMode",
            ControlMessage::SetStreams(_) => "SetStreams",
            ControlMessage::SetRxAntennas(_) => "SetRxAntennas",
            ControlMessage::SetSnr(_) => "SetSnr",
            ControlMessage::Pause => "Pause",
            ControlMessage::Resume => "Resume",
            ControlMessage::ResetStats => "ResetStats",
        }
    }

    /// The configuration after applying a parameter change, validated with
    /// the batch rules. `None` for messages that do not touch parameters.
    pub fn apply(&self, cfg: &LiveConfig) -> Option<Result<LiveConfig, ConfigError>> {
        let mut next = cfg.clone();
        match *self {
            ControlMessage::SetDetector(d) => next.detector = d,
            ControlMessage::SetRaMode(m) => next.ra_mode = m,
            ControlMessage::SetStreams(n) => {
                next.n_users = n;
                if !next.per_user_snr_offset_db.is_empty() {
                    next.per_user_snr_offset_db.resize(n, 0.0);
                }
            }
            ControlMessage::SetRxAntennas(n) => next.n_rx = n,
            ControlMessage::SetSnr(s) => {
                if let Err(e) = check_snr(s) {
                    return Some(Err(e));
                }
                next.snr_db = s;
            }
            ControlMessage::Pause | ControlMessage::Resume | ControlMessage::ResetStats => return None,
        }
        Some(next.validate().map(|_| next))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSnapshot {
    pub user: usize,
    /// Mb/s over the window.
    pub throughput_window: f64,
    pub bler_window: f64,
    pub mcs_current: usize,
    /// Mb/s since the last reset.
    pub throughput_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEvent {
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    /// Frames processed since start; unchanged while paused.
    pub frame: u64,
    pub paused: bool,
    pub detector: DetectorKind,
    pub ra_mode: RaMode,
    pub n_users: usize,
    pub n_rx: usize,
    pub snr_db: f64,
    pub window_frames: usize,
    pub sd_nodes_window: f64,
    /// Frames since the last reset.
    pub frames_since_reset: u64,
    pub users: Vec<UserSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub code: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

impl ErrorEvent {
    pub fn new(code: &str, reason: impl Into<String>, kind: Option<&str>) -> Self {
        Self {
            code: code.to_string(),
            reason: reason.into(),
            kind: kind.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Snapshot(SnapshotEvent),
    Error(ErrorEvent),
}

impl Event {
    /// One line of the wire protocol, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}
