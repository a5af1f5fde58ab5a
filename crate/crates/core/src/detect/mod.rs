//! Multi-user detection: linear (ZF, MMSE) and sphere decoding.

pub mod brute;
pub mod linear;
pub mod oracle;
pub mod sphere;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;

pub use linear::{awgn_maxlog_llr, mmse_detect, zf_detect, LinearDetectionResult, LinearDetector, LinearKind};
pub use sphere::{preprocess, sphere_detect_hard, sphere_detect_soft, NlDetectionResult, SearchPreprocess, SoftOptions};

/// Per-bit log-likelihood ratios; positive favours bit 0.
pub type LlrVector = Vec<f64>;

/// Magnitude at which all detector LLRs are clipped.
pub const LLR_CLIP: f64 = 25.0;

#[inline]
pub fn clip_llr(llr: f64, clip: f64) -> f64 {
    llr.clamp(-clip, clip)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("rank: {0}")]
    RankDeficient(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "ZF")]
    Zf,
    #[serde(rename = "MMSE")]
    Mmse,
    #[serde(rename = "NL")]
    Nl,
}

impl DetectorKind {
    pub fn is_linear(self) -> bool {
        !matches!(self, DetectorKind::Nl)
    }

    pub fn linear_kind(self) -> Option<LinearKind> {
        match self {
            DetectorKind::Zf => Some(LinearKind::Zf),
            DetectorKind::Mmse => Some(LinearKind::Mmse),
            DetectorKind::Nl => None,
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectorKind::Zf => "ZF",
            DetectorKind::Mmse => "MMSE",
            DetectorKind::Nl => "NL",
        })
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ZF" => Ok(DetectorKind::Zf),
            "MMSE" => Ok(DetectorKind::Mmse),
            "NL" => Ok(DetectorKind::Nl),
            _ => Err(format!("unknown detector {s:?}, expected ZF, MMSE or NL")),
        }
    }
}
