//! Reference implementations shared by the integration tests. None of them
//! call into the code they check.

#![allow(dead_code)]

use nlmimo::fec::puncture::pattern;
use nlmimo::fec::{depuncture, viterbi_decode};
use nlmimo::modem::CodeRate;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const TAPS: [u32; 2] = [0o133, 0o171];
const MEMORY: usize = 6;

/// Zero-tail K=7 encoding written as a direct convolution:
/// `c_j[t] = xor_i g_j[i] u[t - i]`, tap `i` read from bit `6 - i`.
pub fn reference_encode(msg: &[u8]) -> Vec<u8> {
    let n = msg.len() + MEMORY;
    let u = |t: isize| -> u32 {
        if t < 0 || t as usize >= msg.len() {
            0
        } else {
            msg[t as usize] as u32
        }
    };
    let mut out = Vec::with_capacity(2 * n);
    for t in 0..n as isize {
        for g in TAPS {
            let mut c = 0;
            for i in 0..=MEMORY {
                c ^= ((g >> (MEMORY - i)) & 1) * u(t - i as isize);
            }
            out.push(c as u8);
        }
    }
    out
}

/// Keep-mask walked over `len` mother bits.
pub fn kept_positions(rate: CodeRate, len: usize) -> Vec<usize> {
    let p = pattern(rate);
    (0..len).filter(|i| p[i % p.len()]).collect()
}

pub fn bits_of(m: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((m >> i) & 1) as u8).collect()
}

/// One noisy BPSK transmission of a random `n`-bit message at `rate`.
/// Returns whether Viterbi picks the message maximising the correlation
/// metric over all `2^n` candidates.
pub fn viterbi_equals_exhaustive_ml(n: usize, rate: CodeRate, sigma: f64, rng: &mut impl Rng) -> bool {
    let mother = 2 * (n + MEMORY);
    let kept = kept_positions(rate, mother);
    let sent = bits_of(rng.random_range(0..1usize << n), n);
    let code = reference_encode(&sent);
    let noise = Normal::new(0.0, sigma).unwrap();
    let rx: Vec<f64> = kept
        .iter()
        .map(|&i| {
            let x = 1.0 - 2.0 * code[i] as f64;
            2.0 * (x + noise.sample(rng)) / (sigma * sigma)
        })
        .collect();

    let mut best = (f64::NEG_INFINITY, 0usize);
    for m in 0..1usize << n {
        let c = reference_encode(&bits_of(m, n));
        let metric: f64 = kept.iter().zip(&rx).map(|(&i, l)| (1.0 - 2.0 * c[i] as f64) * l).sum();
        if metric > best.0 {
            best = (metric, m);
        }
    }
    let decoded = viterbi_decode(&depuncture(&rx, rate, mother));
    decoded == bits_of(best.1, n)
}

/// Ranks with ties sharing their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}
