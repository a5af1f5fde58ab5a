use nlmimo::channel::{sample_channel, ChannelRealization};
use nlmimo::linalg::ComplexMatrix;
use nlmimo::ra::olla::{OLLA_DOWN_DB, OLLA_UP_DB};
use nlmimo::ra::{
    calibrate_thresholds, effective_snr_nl, outer_loop_update, select_mcs, select_mcs_joint, CalibrationOptions, LinkState,
    McsThresholdTable,
};
use nlmimo::rng::rng_for;
use nlmimo::sim::frame::pilot_slot;
use num_complex::Complex64;
use rand::Rng;

/// A 1x1 AWGN calibration of this code family, rounded.
fn table() -> McsThresholdTable {
    McsThresholdTable::new(vec![2.7, 5.6, 7.6, 9.9, 11.7, 14.6, 17.0, 18.3]).unwrap()
}

#[test]
fn scalar_effective_snr_tracks_true_snr() {
    let mut rng = rng_for(12, &[]);
    let mut errors = Vec::new();
    for i in 0..100 {
        let true_db = rng.random_range(-2.0..8.0);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let gain: f64 = rng.random_range(0.3..2.0);
        let h = ComplexMatrix::from_rows(&[vec![Complex64::from_polar(gain, phase)]]);
        // noise level so that |h|^2 / noise_var hits the target
        let snr_db = true_db - 10.0 * (gain * gain).log10();
        let ch = ChannelRealization::new(h, snr_db);
        let truth = 10.0 * (gain * gain / ch.noise_var).log10();
        let (pilots, _) = pilot_slot(&ch, &mut rng_for(12, &[1, i]));
        let eff = effective_snr_nl(&pilots, &table()).unwrap()[0];
        errors.push(eff - truth);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!(mean.abs() < 1.0, "mean error {mean} dB");
}

#[test]
fn outer_loop_has_no_drift_at_target_bler() {
    let mut rng = rng_for(13, &[]);
    let mut s = LinkState::new(0);
    let blocks = 100;
    let mut drift = Vec::new();
    for _ in 0..blocks {
        let start = s.olla_offset_db;
        for _ in 0..1000 {
            let ack = rng.random::<f64>() >= 0.1;
            s = outer_loop_update(&s, ack);
        }
        drift.push(s.olla_offset_db - start);
    }
    let mean = drift.iter().sum::<f64>() / blocks as f64;
    assert!(mean.abs() < 0.5, "mean drift {mean} dB per 1000 frames");
    // the up/down ratio is what makes 10% the fixed point
    assert!((OLLA_DOWN_DB / (OLLA_UP_DB + OLLA_DOWN_DB) - 0.9).abs() < 1e-12);
}

/// The single-user joint path starts at the scalar choice and only leaves it
/// by a probe. Where the pilot estimate is accurate the two agree within one
/// step; where pilots over-read (or saturate) the probe is allowed to walk
/// further down, never further up.
#[test]
fn single_user_joint_is_scalar_selection() {
    let mut rng = rng_for(14, &[]);
    let mut accurate = 0;
    for i in 0..100 {
        let snr = rng.random_range(0.0..25.0);
        let ch = sample_channel(rng.random_range(1..3), 1, snr, &mut rng);
        let states = [LinkState::new(0)];
        let sel = select_mcs_joint(&ch, &states, &table(), 14, &[i]).unwrap();
        let scalar = select_mcs(&states[0], sel.effective_snr_db[0], &table());
        assert_eq!(sel.initial[0], scalar);
        let diff = sel.mcs[0] as i64 - scalar as i64;
        assert!(diff <= 1, "draw {i}: joint {} scalar {scalar}", sel.mcs[0]);

        // matched-filter SNR of the single stream
        let g: f64 = (0..ch.n_rx()).map(|r| ch.h[(r, 0)].norm_sqr()).sum::<f64>() / ch.noise_var;
        if (sel.effective_snr_db[0] - 10.0 * g.log10()).abs() <= 1.0 {
            accurate += 1;
            assert!(diff.abs() <= 1, "draw {i}: joint {} scalar {scalar}", sel.mcs[0]);
        }
    }
    assert!(accurate >= 30, "only {accurate} draws with an accurate estimate");
}

#[test]
fn symmetric_users_get_symmetric_rates() {
    let mut rng = rng_for(15, &[]);
    let n = 4;
    let mut sums = vec![0.0; n];
    let draws = 100;
    for i in 0..draws {
        let ch = sample_channel(4, n, 15.0, &mut rng);
        let states: Vec<LinkState> = (0..n).map(LinkState::new).collect();
        let sel = select_mcs_joint(&ch, &states, &table(), 15, &[i]).unwrap();
        for (s, m) in sums.iter_mut().zip(&sel.mcs) {
            *s += *m as f64;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / draws as f64).collect();
    let spread = means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.75, "{means:?}");
}

#[test]
fn calibration_spans_more_than_10_db() {
    let opts = CalibrationOptions {
        frames_per_probe: 200,
        resolution_db: 0.5,
        ..CalibrationOptions::default()
    };
    let t = calibrate_thresholds(&opts, 3).unwrap();
    assert!(t.threshold(7) - t.threshold(0) > 10.0, "{:?}", t.as_slice());
    assert!(t.as_slice().windows(2).all(|w| w[0] < w[1]));
}
