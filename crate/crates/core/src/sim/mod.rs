//! Frame pipeline, Monte-Carlo harness and experiment presets.

pub mod config;
pub mod experiment;
pub mod frame;
pub mod presets;

use thiserror::Error;

use crate::detect::DetectError;
use crate::ra::RaError;

pub use config::{Arm, ConfigError, Experiment, RaMode, SimConfig};
pub use experiment::{run_experiment, run_frame, ExperimentResult, FrameResult, PointSummary, CSV_HEADER, SYMBOL_RATE_MSPS};
pub use presets::{experiment_presets, preset};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config ({code}): {0}", code = .0.code())]
    Config(#[from] ConfigError),
    #[error("adaptive rate selection needs a threshold table; run `calibrate` first")]
    MissingThresholds,
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Ra(#[from] RaError),
    #[error("worker pool: {0}")]
    Pool(String),
}
