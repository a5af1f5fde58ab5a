//! Effective SNR for linear and sphere-decoded links.
//!
//! For the sphere decoder there is no per-stream SINR, so link quality is
//! measured on a slot of known QPSK pilots: the bitwise mutual information
//! of the pilot LLRs is mapped through the binary-input AWGN J-curve to an
//! equivalent SNR.

use super::{McsThresholdTable, RaError};
use crate::detect::LinearDetectionResult;

/// Minimum number of pilot bits per user.
pub const MIN_PILOT_BITS: usize = 64;

/// Distance kept below/above the table when clamping effective SNR.
pub const EFFECTIVE_SNR_MARGIN_DB: f64 = 10.0;

// Brannstrom/ten Brink fit of the J-function.
const H1: f64 = 0.3073;
const H2: f64 = 0.8935;
const H3: f64 = 1.1064;

/// Pilot LLRs of one user with the transmitted bits.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotLlrs {
    pub llrs: Vec<f64>,
    pub bits: Vec<u8>,
}

/// Mutual information between a bit and a consistent Gaussian LLR of
/// standard deviation `sigma`.
pub fn j_function(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    (1.0 - 2f64.powf(-H1 * sigma.powf(2.0 * H2))).powf(H3)
}

pub fn j_inverse(mi: f64) -> f64 {
    if mi <= 0.0 {
        return 0.0;
    }
    if mi >= 1.0 {
        return f64::INFINITY;
    }
    (-(1.0 - mi.powf(1.0 / H3)).log2() / H1).powf(1.0 / (2.0 * H2))
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Sign-aware estimate `1 - E[log2(1 + exp(-(1-2b) L))]`, clamped to [0, 1].
pub fn pilot_mutual_information(p: &PilotLlrs) -> f64 {
    let n = p.llrs.len().min(p.bits.len());
    if n == 0 {
        return 0.0;
    }
    let loss: f64 = p
        .llrs
        .iter()
        .zip(&p.bits)
        .map(|(&l, &b)| {
            let x = if b == 0 { l } else { -l };
            softplus(-x)
        })
        .sum::<f64>()
        / (n as f64 * std::f64::consts::LN_2);
    (1.0 - loss).clamp(0.0, 1.0)
}

/// Post-detection SINR in dB.
pub fn effective_snr_linear(det: &LinearDetectionResult) -> Vec<f64> {
    effective_snr_linear_sinr(&det.post_sinr)
}

pub fn effective_snr_linear_sinr(post_sinr: &[f64]) -> Vec<f64> {
    post_sinr.iter().map(|&s| 10.0 * s.log10()).collect()
}

/// Equivalent AWGN SNR per user from sphere-decoded pilot LLRs, clamped to
/// the table range widened by [`EFFECTIVE_SNR_MARGIN_DB`]. A fully
/// saturated pilot slot maps to the upper clamp.
pub fn effective_snr_nl(pilots: &[PilotLlrs], table: &McsThresholdTable) -> Result<Vec<f64>, RaError> {
    let lo = table.min_db() - EFFECTIVE_SNR_MARGIN_DB;
    let hi = table.max_db() + EFFECTIVE_SNR_MARGIN_DB;
    pilots
        .iter()
        .enumerate()
        .map(|(user, p)| {
            let bits = p.llrs.len().min(p.bits.len());
            if bits < MIN_PILOT_BITS {
                return Err(RaError::InsufficientPilots { user, bits });
            }
            let mi = pilot_mutual_information(p);
            if mi >= 1.0 - 1e-9 {
                return Ok(hi);
            }
            let sigma = j_inverse(mi);
            // consistent LLRs of a unit-energy QPSK bit: variance = 4 * SNR
            let snr_db = 10.0 * (sigma * sigma / 4.0).log10();
            Ok(snr_db.clamp(lo, hi))
        })
        .collect()
}
