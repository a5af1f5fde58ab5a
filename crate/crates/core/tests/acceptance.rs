//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.
//!
//! `cargo test -p nlmimo --test acceptance -- 3 5` runs a subset.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use nlmimo::detect::oracle::{all_shapes, check_shape};
use nlmimo::fec::{crc16_attach, crc16_check};
use nlmimo::modem::{mcs_table, CodeRate};
use nlmimo::ra::{calibrate_thresholds, outer_loop_update, select_mcs, CalibrationOptions, LinkState, McsThresholdTable};
use nlmimo::rng::rng_for;
use nlmimo::sim::presets::{e1, e2, e3};
use nlmimo::sim::{run_experiment, Arm, Experiment, ExperimentResult, RaMode, SYMBOL_RATE_MSPS};
use rand::Rng;
use rand_distr::{Distribution, Normal};

const SEED: u64 = 1;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn run_all(exp: &Experiment, thresholds: Option<&McsThresholdTable>, workers: usize) -> Vec<(String, ExperimentResult)> {
    exp.arms
        .iter()
        .map(|a| (a.name.clone(), run_experiment(&a.config, thresholds, workers).expect("preset runs")))
        .collect()
}

fn arm<'a>(runs: &'a [(String, ExperimentResult)], name: &str) -> &'a ExperimentResult {
    &runs.iter().find(|(n, _)| n == name).expect("arm exists").1
}

fn totals(r: &ExperimentResult) -> Vec<f64> {
    r.points.iter().map(|p| p.total.throughput).collect()
}

fn max_bler(r: &ExperimentResult, point: usize) -> f64 {
    r.points[point].users.iter().map(|u| u.bler).fold(0.0, f64::max)
}

fn min_bler(r: &ExperimentResult, point: usize) -> f64 {
    r.points[point].users.iter().map(|u| u.bler).fold(1.0, f64::min)
}

fn oracle(instances: usize, soft: bool, budget: Duration) -> Verdict {
    let t = Instant::now();
    let reports: Vec<_> = all_shapes()
        .into_iter()
        .enumerate()
        .map(|(i, s)| check_shape(s, instances, SEED + i as u64, soft))
        .collect();
    let bad = reports.iter().filter(|r| !r.passed()).count();
    let total: usize = reports.iter().map(|r| r.instances).sum();
    let max_err = reports.iter().map(|r| r.max_llr_error).fold(0.0, f64::max);
    let max_hyp = reports.iter().map(|r| r.max_hypotheses).max().unwrap_or(0);
    let elapsed = t.elapsed();
    let mut detail = format!(
        "{} shapes x {instances}, {total} instances, {bad} shapes with mismatches, max hypotheses {max_hyp}, {:.0}s",
        reports.len(),
        elapsed.as_secs_f64()
    );
    if soft {
        detail.push_str(&format!(", max LLR error {max_err:.2e}"));
    }
    verdict(bad == 0 && max_hyp <= 4096 && elapsed < budget, detail)
}

fn halving_of_antennas() -> Verdict {
    let t = Instant::now();
    let exp = e1();
    let frames = exp.arms[0].config.frames_per_point;
    let runs = run_all(&exp, None, workers());
    let (nl, m44, m84) = (arm(&runs, "nl_4x4"), arm(&runs, "mmse_4x4"), arm(&runs, "mmse_8x4"));
    let mcs = match m44.config.ra_mode {
        RaMode::Static(m) => m,
        RaMode::Adaptive => unreachable!(),
    };
    let peak = m44.config.n_users as f64 * mcs_table()[mcs].spectral_efficiency * SYMBOL_RATE_MSPS;

    let mut waterfall = Vec::new();
    let mut good = Vec::new();
    for (i, p) in nl.points.iter().enumerate() {
        let (a, b, c) = (p.total.throughput, m44.points[i].total.throughput, m84.points[i].total.throughput);
        if !(0.1 * peak..=0.9 * peak).contains(&b) {
            continue;
        }
        waterfall.push(p.snr_db);
        let precise = [&p.total, &m44.points[i].total, &m84.points[i].total]
            .iter()
            .all(|s| s.ci95 < 0.03 * s.throughput);
        println!(
            "    {:>5.1} dB  nl {a:6.2}  mmse4x4 {b:6.2}  mmse8x4 {c:6.2}  nl/8x4 {:.3}  nl/4x4 {:.3}",
            p.snr_db,
            a / c,
            a / b
        );
        if a >= 0.95 * c && a >= 1.2 * b && precise {
            good.push(p.snr_db);
        }
    }
    verdict(
        good.len() >= 3 && frames >= 20_000 && t.elapsed() < Duration::from_secs(1800),
        format!(
            "{frames} frames/point, waterfall points {waterfall:?}, satisfied at {good:?}, {:.0}s",
            t.elapsed().as_secs_f64()
        ),
    )
}

/// Largest user count from `counts` whose every user meets BLER <= 0.1.
fn supported(runs: &[(usize, ExperimentResult)], point: usize) -> usize {
    runs.iter()
        .filter(|(_, r)| max_bler(r, point) <= 0.1)
        .map(|(n, _)| *n)
        .max()
        .unwrap_or(0)
}

fn with_mcs(a: &Arm, mcs: usize) -> Arm {
    let mut a = a.clone();
    a.config.ra_mode = RaMode::Static(mcs);
    a
}

fn enhanced_connectivity(e2_runs: &[(String, ExperimentResult)]) -> Verdict {
    let nl = arm(e2_runs, "nl_1x4");
    let mmse = arm(e2_runs, "mmse_1x4");
    let witness = (0..nl.points.len())
        .find(|&i| nl.points[i].snr_db <= 30.0 && max_bler(nl, i) <= 0.1 && min_bler(mmse, i) >= 0.5);

    // sharing: rate 1.0 is QPSK 1/2, rate 1.5 is QPSK 3/4
    let exp = e2();
    let nl_arms: Vec<&Arm> = exp.arms.iter().filter(|a| a.name.starts_with("nl_")).collect();
    let at_rate = |mcs: usize| -> Vec<(usize, ExperimentResult)> {
        nl_arms
            .iter()
            .map(|a| {
                let a = with_mcs(a, mcs);
                let r = if mcs == 0 {
                    arm(e2_runs, &a.name).clone()
                } else {
                    run_experiment(&a.config, None, workers()).expect("runs")
                };
                (a.config.n_users, r)
            })
            .collect()
    };
    let (low, high) = (at_rate(0), at_rate(1));
    debug_assert_eq!(mcs_table()[0].spectral_efficiency, 1.0);
    debug_assert_eq!(mcs_table()[1].spectral_efficiency, 1.5);
    let mut monotone = true;
    let mut counts = Vec::new();
    for i in 0..nl.points.len() {
        let (a, b) = (supported(&low, i), supported(&high, i));
        monotone &= b <= a;
        counts.push(format!("{}:{a}/{b}", nl.points[i].snr_db));
    }
    let detail = match witness {
        Some(i) => format!(
            "at {} dB nl_1x4 max BLER {:.3}, mmse_1x4 min BLER {:.3}; supported users (rate 1.0/1.5) {}",
            nl.points[i].snr_db,
            max_bler(nl, i),
            min_bler(mmse, i),
            counts.join(" ")
        ),
        None => format!("no SNR point separates nl_1x4 from mmse_1x4; supported {}", counts.join(" ")),
    };
    verdict(witness.is_some() && monotone, detail)
}

fn rate_adaptation() -> Verdict {
    let t = Instant::now();
    let table = calibrate_thresholds(&CalibrationOptions::default(), SEED).expect("calibration converges");
    let thr: Vec<String> = table.as_slice().iter().map(|x| format!("{x:.2}")).collect();
    println!("    thresholds [{}]", thr.join(", "));
    let exp = e3();
    let runs = run_all(&exp, Some(&table), workers());
    let adaptive = totals(arm(&runs, "adaptive"));
    let statics: Vec<(String, Vec<f64>)> = runs
        .iter()
        .filter(|(n, _)| n != "adaptive")
        .map(|(n, r)| (n.clone(), totals(r)))
        .collect();
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;

    let mut per_point = true;
    for (i, a) in adaptive.iter().enumerate() {
        let (best_name, best) = statics
            .iter()
            .map(|(n, v)| (n.as_str(), v[i]))
            .fold(("", f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        let ok = *a >= 0.95 * best;
        per_point &= ok;
        println!(
            "    {:>5.1} dB  adaptive {a:6.2}  best static {best:6.2} ({best_name})  ratio {:.3}{}",
            arm(&runs, "adaptive").points[i].snr_db,
            a / best,
            if ok { "" } else { "  <" }
        );
    }
    let (best_name, best_avg) = statics
        .iter()
        .map(|(n, v)| (n.as_str(), mean(v)))
        .fold(("", f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
    let avg = mean(&adaptive);
    verdict(
        per_point && avg > 1.1 * best_avg,
        format!(
            "{} points, per-point >= 0.95 x best static: {per_point}; sweep mean {avg:.2} vs {best_name} {best_avg:.2} (x{:.3}), {:.0}s",
            adaptive.len(),
            avg / best_avg,
            t.elapsed().as_secs_f64()
        ),
    )
}

fn fec_oracle() -> Verdict {
    let mut rng = rng_for(SEED, &[6]);
    let draws = 100;
    let mut vit_fail = 0;
    for rate in CodeRate::ALL {
        for d in 0..draws {
            // noise from nearly clean to well past the waterfall
            let sigma = 0.4 + 1.2 * d as f64 / draws as f64;
            if !common::viterbi_equals_exhaustive_ml(12, rate, sigma, &mut rng) {
                vit_fail += 1;
            }
        }
    }

    let mut payloads: Vec<Vec<u8>> = vec![vec![0; 64], vec![1; 64]];
    payloads.extend((0..1000).map(|_| (0..64).map(|_| rng.random_range(0..2)).collect()));
    let mut crc_fail = 0;
    let mut flips = 0;
    for p in &payloads {
        let framed = crc16_attach(p);
        if !crc16_check(&framed) {
            crc_fail += 1;
        }
        for i in 0..framed.len() {
            let mut f = framed.clone();
            f[i] ^= 1;
            flips += 1;
            if crc16_check(&f) {
                crc_fail += 1;
            }
        }
    }
    verdict(
        vit_fail == 0 && crc_fail == 0,
        format!(
            "Viterbi vs 4096-candidate ML: {vit_fail} of {} disagree; CRC: {crc_fail} misses over {flips} single flips on {} payloads",
            draws * CodeRate::ALL.len(),
            payloads.len()
        ),
    )
}

/// A link that always passes at or below MCS `capable` and always fails
/// above it, fed an estimate that is biased and noisy.
fn olla_equilibrium() -> Verdict {
    let table = McsThresholdTable::new(vec![2.7, 5.6, 7.6, 9.9, 11.7, 14.6, 17.0, 18.3]).expect("valid");
    let true_snr = 12.5;
    let capable = table.as_slice().iter().rposition(|&t| t <= true_snr).unwrap_or(0);
    let noise = Normal::new(2.0, 1.0).expect("valid");
    let mut rng = rng_for(SEED, &[7]);
    let mut s = LinkState::new(0);
    let frames = 100_000;
    let mut nacks = 0usize;
    for _ in 0..frames {
        let est = true_snr + noise.sample(&mut rng);
        let mcs = select_mcs(&s, est, &table);
        let ack = mcs <= capable;
        nacks += usize::from(!ack);
        s = outer_loop_update(&s, ack);
    }
    let bler = nacks as f64 / frames as f64;
    verdict(
        (0.05..=0.20).contains(&bler),
        format!("{frames} frames, BLER {bler:.4}, final offset {:.2} dB", s.olla_offset_db),
    )
}

fn csvs(runs: &[(String, ExperimentResult)]) -> Vec<(String, String)> {
    runs.iter().map(|(n, r)| (n.clone(), r.to_csv())).collect()
}

fn shortened(mut exp: Experiment, frames: usize) -> Experiment {
    for a in &mut exp.arms {
        a.config.frames_per_point = frames;
    }
    exp
}

fn determinism(e2_first: Option<&[(String, ExperimentResult)]>, table: &McsThresholdTable) -> Verdict {
    let first = match e2_first {
        Some(r) => csvs(r),
        None => csvs(&run_all(&e2(), None, 1)),
    };
    let second = csvs(&run_all(&e2(), None, 4));
    let mut same = first == second;
    let mut checked = vec!["E2 (full, workers 1 vs 4)".to_string()];
    for exp in [shortened(e1(), 50), shortened(e3(), 20)] {
        let a = csvs(&run_all(&exp, Some(table), 1));
        let b = csvs(&run_all(&exp, Some(table), 4));
        let c = csvs(&run_all(&exp, Some(table), 1));
        same &= a == b && a == c;
        checked.push(format!("{} (short, workers 1, 4, 1)", exp.name));
    }
    verdict(same, format!("byte-identical CSV: {same}; {}", checked.join(", ")))
}

fn main() {
    let wanted: BTreeSet<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let mut failed = 0;
    let mut report = |n: u32, name: &str, v: Verdict| {
        println!("{} {n}. {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    };

    if run(1) {
        report(1, "sphere decoder hard decisions vs brute force", oracle(1000, false, Duration::from_secs(300)));
    }
    if run(2) {
        report(2, "sphere decoder max-log LLRs vs brute force", oracle(500, true, Duration::from_secs(600)));
    }
    if run(3) {
        report(3, "NL 4x4 against MMSE 4x4 and 8x4", halving_of_antennas());
    }
    let e2_runs = (run(4) || run(8)).then(|| run_all(&e2(), None, 1));
    if run(4) {
        report(4, "four users on one receive antenna", enhanced_connectivity(e2_runs.as_deref().expect("ran")));
    }
    if run(5) {
        report(5, "joint rate adaptation against static MCS", rate_adaptation());
    }
    if run(6) {
        report(6, "Viterbi and CRC exhaustive oracles", fec_oracle());
    }
    if run(7) {
        report(7, "outer loop equilibrium", olla_equilibrium());
    }
    if run(8) {
        let table = McsThresholdTable::new(vec![2.7, 5.6, 7.6, 9.9, 11.7, 14.6, 17.0, 18.3]).expect("valid");
        report(8, "determinism across runs and worker counts", determinism(e2_runs.as_deref(), &table));
    }

    if failed > 0 {
        std::process::exit(1);
    }
}
