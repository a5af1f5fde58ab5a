//! Exhaustive enumeration of the regularized-ML metric. Used as the oracle
//! for the sphere decoder; it shares no code with the tree search.

use num_complex::Complex64;

use super::LlrVector;
use crate::channel::ChannelRealization;
use crate::modem::Constellation;

/// `|y - H s|^2 + noise_var |s|^2` evaluated directly.
pub fn regularized_metric(ch: &ChannelRealization, y: &[Complex64], s: &[Complex64]) -> f64 {
    let hs = ch.h.mul_vec(s).expect("one symbol per stream");
    let resid: f64 = y.iter().zip(&hs).map(|(a, b)| (a - b).norm_sqr()).sum();
    resid + ch.noise_var * s.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

pub fn joint_hypotheses(constellations: &[&Constellation]) -> u64 {
    constellations.iter().map(|c| c.len() as u64).product()
}

/// Calls `f(labels, metric)` for every joint hypothesis.
fn enumerate(ch: &ChannelRealization, y: &[Complex64], constellations: &[&Constellation], mut f: impl FnMut(&[usize], f64)) {
    let n = constellations.len();
    let mut labels = vec![0usize; n];
    let mut s: Vec<Complex64> = constellations.iter().map(|c| c.points()[0]).collect();
    loop {
        f(&labels, regularized_metric(ch, y, &s));
        // mixed-radix increment
        let mut k = 0;
        loop {
            if k == n {
                return;
            }
            labels[k] += 1;
            if labels[k] < constellations[k].len() {
                s[k] = constellations[k].points()[labels[k]];
                break;
            }
            labels[k] = 0;
            s[k] = constellations[k].points()[0];
            k += 1;
        }
    }
}

pub fn brute_force_hard(ch: &ChannelRealization, y: &[Complex64], constellations: &[&Constellation]) -> Vec<usize> {
    let mut best = (f64::INFINITY, vec![]);
    enumerate(ch, y, constellations, |labels, m| {
        if m < best.0 {
            best = (m, labels.to_vec());
        }
    });
    best.1
}

/// Regularized-ML labels and unclipped max-log LLRs
/// `(min_{b=1} m - min_{b=0} m) / noise_var` per stream.
pub fn brute_force_maxlog(
    ch: &ChannelRealization,
    y: &[Complex64],
    constellations: &[&Constellation],
) -> (Vec<usize>, Vec<LlrVector>) {
    let mut mins: Vec<Vec<[f64; 2]>> = constellations
        .iter()
        .map(|c| vec![[f64::INFINITY; 2]; c.bits_per_symbol()])
        .collect();
    let mut best = (f64::INFINITY, vec![]);
    enumerate(ch, y, constellations, |labels, m| {
        if m < best.0 {
            best = (m, labels.to_vec());
        }
        for (u, &label) in labels.iter().enumerate() {
            let c = constellations[u];
            for (i, slot) in mins[u].iter_mut().enumerate() {
                let b = c.bit(label, i) as usize;
                if m < slot[b] {
                    slot[b] = m;
                }
            }
        }
    });
    let llrs = mins
        .iter()
        .map(|bits| bits.iter().map(|[m0, m1]| (m1 - m0) / ch.noise_var).collect())
        .collect();
    (best.1, llrs)
}
