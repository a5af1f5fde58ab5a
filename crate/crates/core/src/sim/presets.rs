//! The three reference experiments.

use super::config::{Arm, Experiment, RaMode, SimConfig};
use crate::channel::FadingModel;
use crate::detect::DetectorKind;
use crate::modem::mcs_table;

pub const DEFAULT_SEED: u64 = 2024;

fn arm(name: &str, n_rx: usize, n_users: usize, detector: DetectorKind, ra_mode: RaMode, sweep: &[f64], frames: usize) -> Arm {
    Arm {
        name: name.to_string(),
        config: SimConfig {
            n_rx,
            n_users,
            detector,
            ra_mode,
            snr_sweep: sweep.to_vec(),
            frames_per_point: frames,
            seed: DEFAULT_SEED,
            per_user_snr_offset_db: Vec::new(),
            channel: FadingModel::Rayleigh,
        },
    }
}

/// Sphere decoding with four antennas against MMSE with four and eight.
pub fn e1() -> Experiment {
    let sweep: Vec<f64> = (2..=12).map(f64::from).collect();
    let frames = 20_000;
    // QPSK 3/4
    let m = RaMode::Static(1);
    Experiment {
        name: "E1".into(),
        arms: vec![
            arm("nl_4x4", 4, 4, DetectorKind::Nl, m, &sweep, frames),
            arm("mmse_4x4", 4, 4, DetectorKind::Mmse, m, &sweep, frames),
            arm("mmse_8x4", 8, 4, DetectorKind::Mmse, m, &sweep, frames),
        ],
    }
}

/// One receive antenna shared by up to four users.
pub fn e2() -> Experiment {
    let sweep: Vec<f64> = (0..=12).map(|i| 2.5 * i as f64).collect();
    let frames = 1_000;
    // QPSK 1/2
    let m = RaMode::Static(0);
    Experiment {
        name: "E2".into(),
        arms: vec![
            arm("nl_1x1", 1, 1, DetectorKind::Nl, m, &sweep, frames),
            arm("nl_1x2", 1, 2, DetectorKind::Nl, m, &sweep, frames),
            arm("nl_1x4", 1, 4, DetectorKind::Nl, m, &sweep, frames),
            arm("mmse_1x4", 1, 4, DetectorKind::Mmse, m, &sweep, frames),
        ],
    }
}

/// Per-user adaptation against every fixed MCS, users 3 dB apart.
pub fn e3() -> Experiment {
    let sweep: Vec<f64> = (0..10).map(|i| 12.0 + 3.0 * i as f64).collect();
    let frames = 200;
    let offsets = vec![0.0, -3.0, -6.0, -9.0];
    let mut arms = vec![arm("adaptive", 4, 4, DetectorKind::Nl, RaMode::Adaptive, &sweep, frames)];
    arms.extend(
        mcs_table()
            .iter()
            .map(|e| arm(&format!("static_{}", e.index), 4, 4, DetectorKind::Nl, RaMode::Static(e.index), &sweep, frames)),
    );
    for a in &mut arms {
        a.config.per_user_snr_offset_db = offsets.clone();
    }
    Experiment {
        name: "E3".into(),
        arms,
    }
}

pub fn experiment_presets() -> Vec<Experiment> {
    vec![e1(), e2(), e3()]
}

/// Looks a preset up by name, case-insensitively.
pub fn preset(name: &str) -> Option<Experiment> {
    experiment_presets().into_iter().find(|e| e.name.eq_ignore_ascii_case(name))
}
