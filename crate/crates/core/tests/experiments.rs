mod common;

use common::spearman;
use nlmimo::channel::FadingModel;
use nlmimo::detect::DetectorKind;
use nlmimo::ra::{calibrate_thresholds, CalibrationOptions};
use nlmimo::sim::experiment::{CSV_HEADER, SYMBOL_RATE_MSPS};
use nlmimo::sim::{run_experiment, RaMode, SimConfig};

fn config(n_rx: usize, n_users: usize, sweep: Vec<f64>, frames: usize) -> SimConfig {
    SimConfig {
        n_rx,
        n_users,
        detector: DetectorKind::Nl,
        ra_mode: RaMode::Static(0),
        snr_sweep: sweep,
        frames_per_point: frames,
        seed: 31,
        per_user_snr_offset_db: Vec::new(),
        channel: FadingModel::Rayleigh,
    }
}

#[test]
fn noise_dominated_link_delivers_nothing() {
    let r = run_experiment(&config(2, 2, vec![-20.0], 100), None, 1).unwrap();
    assert_eq!(r.points[0].total.delivered_bits, 0);
    assert_eq!(r.points[0].total.throughput, 0.0);
}

#[test]
fn throughput_rises_with_snr() {
    let sweep: Vec<f64> = (0..10).map(|i| -6.0 + 2.0 * i as f64).collect();
    let r = run_experiment(&config(2, 2, sweep.clone(), 150), None, 1).unwrap();
    let tput: Vec<f64> = r.points.iter().map(|p| p.total.throughput).collect();
    let rho = spearman(&sweep, &tput);
    assert!(rho > 0.95, "rho {rho} over {tput:?}");
}

#[test]
fn awgn_half_rate_qpsk_saturates_above_threshold() {
    let opts = CalibrationOptions {
        frames_per_probe: 300,
        resolution_db: 0.25,
        ..CalibrationOptions::default()
    };
    let t0 = calibrate_thresholds(&opts, 8).unwrap().threshold(0);
    let mut cfg = config(1, 1, vec![t0 + 2.0, t0 + 4.0, t0 + 8.0], 1000);
    cfg.channel = FadingModel::Awgn;
    let r = run_experiment(&cfg, None, 1).unwrap();
    // QPSK 1/2 carries one information bit per symbol
    let ceiling = 1.0 * SYMBOL_RATE_MSPS;
    for p in &r.points {
        assert!(p.total.throughput <= ceiling + 1e-9);
        assert!(p.total.throughput >= 0.99 * ceiling, "{} dB: {}", p.snr_db, p.total.throughput);
    }
}

#[test]
fn csv_is_deterministic() {
    let cfg = config(2, 3, vec![0.0, 8.0], 20);
    let a = run_experiment(&cfg, None, 1).unwrap().to_csv();
    let b = run_experiment(&cfg, None, 3).unwrap().to_csv();
    assert_eq!(a, b);
    assert_eq!(a.lines().next(), Some(CSV_HEADER));
    // a header, then one row per user and one total row per point
    assert_eq!(a.lines().count(), 1 + 2 * (3 + 1));
}

#[test]
fn zero_frames_rejected() {
    let cfg = config(2, 2, vec![0.0], 0);
    assert!(run_experiment(&cfg, None, 1).is_err());
}
