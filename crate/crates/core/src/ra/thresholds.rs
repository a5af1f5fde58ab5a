//! Per-MCS SNR thresholds calibrated on an AWGN link.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RaError;
use crate::channel::{ChannelRealization, FadingModel};
use crate::detect::DetectorKind;
use crate::fec::{conv, crc, puncture, PAYLOAD_BITS};
use crate::modem::{mcs_table, CodeRate};
use crate::rng::{rng_for, stream};
use crate::sim::frame::transmit_frame;

pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const THRESHOLDS_META_FILE: &str = "thresholds.meta.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ThresholdEntry {
    mcs: usize,
    snr_db: f64,
}

/// Minimum AWGN SNR (dB) per MCS index for BLER at or below the target.
#[derive(Debug, Clone, PartialEq)]
pub struct McsThresholdTable {
    thresholds_db: Vec<f64>,
}

impl McsThresholdTable {
    pub fn new(thresholds_db: Vec<f64>) -> Result<Self, RaError> {
        if thresholds_db.len() != mcs_table().len() {
            return Err(RaError::InvalidTable(format!(
                "expected {} entries, got {}",
                mcs_table().len(),
                thresholds_db.len()
            )));
        }
        if thresholds_db.iter().any(|t| !t.is_finite()) {
            return Err(RaError::InvalidTable("non-finite threshold".into()));
        }
        if let Some(i) = thresholds_db.windows(2).position(|w| w[1] <= w[0]) {
            return Err(RaError::InvalidTable(format!(
                "threshold of MCS {} does not exceed MCS {}",
                i + 1,
                i
            )));
        }
        Ok(Self { thresholds_db })
    }

    pub fn threshold(&self, mcs: usize) -> f64 {
        self.thresholds_db[mcs]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.thresholds_db
    }

    pub fn len(&self) -> usize {
        self.thresholds_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds_db.is_empty()
    }

    pub fn min_db(&self) -> f64 {
        self.thresholds_db[0]
    }

    pub fn max_db(&self) -> f64 {
        *self.thresholds_db.last().expect("table is never empty")
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<ThresholdEntry> = self
            .thresholds_db
            .iter()
            .enumerate()
            .map(|(mcs, &snr_db)| ThresholdEntry { mcs, snr_db })
            .collect();
        serde_json::to_string_pretty(&entries).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RaError> {
        let mut entries: Vec<ThresholdEntry> = serde_json::from_str(s)?;
        entries.sort_by_key(|e| e.mcs);
        if entries.iter().enumerate().any(|(i, e)| e.mcs != i) {
            return Err(RaError::InvalidTable("MCS indices must be 0..n without gaps".into()));
        }
        Self::new(entries.into_iter().map(|e| e.snr_db).collect())
    }

    /// Writes `thresholds.json` and its metadata companion into `dir`.
    pub fn save(&self, dir: &Path, meta: &ThresholdMeta) -> Result<(), RaError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(THRESHOLDS_FILE), self.to_json())?;
        fs::write(dir.join(THRESHOLDS_META_FILE), serde_json::to_string_pretty(meta)?)?;
        Ok(())
    }

    /// Loads a table from `dir`, rejecting it if it was calibrated against a
    /// different FEC/modem configuration.
    pub fn load(dir: &Path) -> Result<(Self, ThresholdMeta), RaError> {
        let path = dir.join(THRESHOLDS_FILE);
        let table = match fs::read_to_string(&path) {
            Ok(s) => Self::from_json(&s)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(RaError::MissingThresholds(path.display().to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        let meta: ThresholdMeta = serde_json::from_str(&fs::read_to_string(dir.join(THRESHOLDS_META_FILE))?)?;
        let current = config_hash();
        if meta.config_hash != current {
            return Err(RaError::StaleThresholds {
                expected: current,
                found: meta.config_hash,
            });
        }
        Ok((table, meta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMeta {
    pub config_hash: String,
    pub seed: u64,
    pub frames_per_probe: usize,
    pub resolution_db: f64,
    pub target_bler: f64,
}

/// SHA-256 over everything that shapes the calibrated curves: payload size,
/// CRC, code generators, puncturing patterns and the MCS table.
pub fn config_hash() -> String {
    let mut h = Sha256::new();
    h.update(format!("payload={PAYLOAD_BITS};crc=0x{:04x}/0x{:04x};", crc::POLY, crc::INIT));
    h.update(format!("k={};gen={:?};", conv::K, conv::GENERATORS));
    for rate in CodeRate::ALL {
        h.update(format!("punct[{rate}]={:?};", puncture::pattern(rate)));
    }
    for e in mcs_table() {
        h.update(format!("mcs{}={}@{};", e.index, e.scheme, e.code_rate));
        for p in e.constellation().points() {
            h.update(format!("{:.15e},{:.15e};", p.re, p.im));
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub frames_per_probe: usize,
    pub resolution_db: f64,
    pub target_bler: f64,
    pub min_snr_db: f64,
    pub max_snr_db: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            frames_per_probe: 2000,
            resolution_db: 0.25,
            target_bler: 0.1,
            min_snr_db: -10.0,
            max_snr_db: 40.0,
        }
    }
}

impl CalibrationOptions {
    /// Runs up to `frames_per_probe` frames and reports whether the BLER
    /// stays at or below target. Stops as soon as the verdict is settled.
    pub fn probe_passes(&self, mut frame_ok: impl FnMut(u64) -> bool) -> bool {
        let n = self.frames_per_probe;
        let allowed = (self.target_bler * n as f64).floor() as usize;
        let mut errors = 0;
        for i in 0..n {
            if !frame_ok(i as u64) {
                errors += 1;
                if errors > allowed {
                    return false;
                }
            } else if (i + 1 - errors) >= n - allowed {
                return true;
            }
        }
        true
    }
}

/// Binary search per MCS with a caller-supplied frame oracle
/// `frame_ok(mcs, snr_db, frame_index)`.
pub fn calibrate_with(
    opts: &CalibrationOptions,
    mut frame_ok: impl FnMut(usize, f64, u64) -> bool,
) -> Result<McsThresholdTable, RaError> {
    let mut out = Vec::with_capacity(mcs_table().len());
    for m in 0..mcs_table().len() {
        let mut passes = |snr: f64| opts.probe_passes(|i| frame_ok(m, snr, i));
        let (mut lo, mut hi) = (opts.min_snr_db, opts.max_snr_db);
        if passes(lo) || !passes(hi) {
            return Err(RaError::CalibrationDiverged { mcs: m });
        }
        while hi - lo > opts.resolution_db {
            let mid = 0.5 * (lo + hi);
            if passes(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(hi);
    }
    McsThresholdTable::new(out)
}

/// Calibrates against the real FEC/modem stack on a 1x1 AWGN link.
pub fn calibrate_thresholds(opts: &CalibrationOptions, seed: u64) -> Result<McsThresholdTable, RaError> {
    calibrate_with(opts, |m, snr, i| {
        let mut rng = rng_for(seed, &[stream::CALIBRATION, m as u64, snr.to_bits(), i, stream::CHANNEL]);
        let ch = ChannelRealization::draw(FadingModel::Awgn, 1, 1, snr, &mut rng);
        let path = [stream::CALIBRATION, m as u64, snr.to_bits(), i];
        let mut payload = rng_for(seed, &[&path[..], &[stream::PAYLOAD]].concat());
        let mut noise = rng_for(seed, &[&path[..], &[stream::NOISE]].concat());
        transmit_frame(&ch, DetectorKind::Zf, &[m], &mut payload, &mut noise)
            .expect("1x1 AWGN link is full rank")
            .all_pass()
    })
}
