//! Rate adaptation: calibrated thresholds, outer-loop offset and joint
//! selection for sphere-decoded users.

pub mod effective;
pub mod joint;
pub mod olla;
pub mod thresholds;

use thiserror::Error;

pub use effective::{effective_snr_linear, effective_snr_linear_sinr, effective_snr_nl, PilotLlrs};
pub use joint::{select_mcs_joint, JointSelection};
pub use olla::{outer_loop_update, select_mcs, LinkState};
pub use thresholds::{calibrate_thresholds, config_hash, CalibrationOptions, McsThresholdTable, ThresholdMeta};

#[derive(Debug, Error)]
pub enum RaError {
    #[error("user {user}: {bits} pilot bits, need at least 64")]
    InsufficientPilots { user: usize, bits: usize },
    #[error("calibration diverged for MCS {mcs}: BLER never crosses target in the search range")]
    CalibrationDiverged { mcs: usize },
    #[error("invalid threshold table: {0}")]
    InvalidTable(String),
    #[error("no threshold table at {0}; run `calibrate` first")]
    MissingThresholds(String),
    #[error("threshold table was calibrated for config {found}, current is {expected}; rerun `calibrate`")]
    StaleThresholds { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PartialEq for RaError {
    fn eq(&self, other: &Self) -> bool {
        use RaError::*;
        match (self, other) {
            (InsufficientPilots { user: a, bits: b }, InsufficientPilots { user: c, bits: d }) => a == c && b == d,
            (CalibrationDiverged { mcs: a }, CalibrationDiverged { mcs: b }) => a == b,
            (InvalidTable(a), InvalidTable(b)) | (MissingThresholds(a), MissingThresholds(b)) => a == b,
            (StaleThresholds { expected: a, found: b }, StaleThresholds { expected: c, found: d }) => a == c && b == d,
            _ => false,
        }
    }
}
