//! Randomized equivalence check of the sphere decoder against exhaustive
//! enumeration.

use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::brute::{brute_force_hard, brute_force_maxlog, joint_hypotheses};
use super::sphere::{preprocess, sphere_detect_hard, sphere_detect_soft, SoftOptions};
use crate::channel::sample_channel;
use crate::modem::{Constellation, Scheme};
use crate::rng::rng_for;

/// Largest joint hypothesis count generated.
pub const MAX_HYPOTHESES: u64 = 4096;

/// LLR agreement: absolute below magnitude 1, relative above.
pub const LLR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Shape {
    pub streams: usize,
    pub rx: usize,
}

/// Every shape with 1 to 4 streams and 1 to 4 receive antennas.
pub fn all_shapes() -> Vec<Shape> {
    (1..=4)
        .flat_map(|streams| (1..=4).map(move |rx| Shape { streams, rx }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub shape: Shape,
    pub instances: usize,
    pub hard_mismatches: usize,
    pub soft_mismatches: usize,
    pub max_llr_error: f64,
    pub mean_nodes: f64,
    pub max_hypotheses: u64,
}

impl ShapeReport {
    pub fn passed(&self) -> bool {
        self.hard_mismatches == 0 && self.soft_mismatches == 0
    }
}

/// Random QPSK/16QAM mix with at most [`MAX_HYPOTHESES`] joint hypotheses.
fn draw_mix(streams: usize, rng: &mut impl Rng) -> Vec<&'static Constellation> {
    let schemes = [Scheme::Qpsk, Scheme::Qam16];
    let mut mix: Vec<&'static Constellation> =
        (0..streams).map(|_| schemes.choose(rng).unwrap().constellation()).collect();
    while joint_hypotheses(&mix) > MAX_HYPOTHESES {
        let dense: Vec<usize> = (0..streams).filter(|&k| mix[k].len() > 4).collect();
        mix[*dense.choose(rng).unwrap()] = Scheme::Qpsk.constellation();
    }
    mix
}

fn llr_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= LLR_TOLERANCE * b.abs().max(1.0)
}

struct Instance {
    hard_ok: bool,
    soft_ok: bool,
    llr_error: f64,
    nodes: u64,
    hypotheses: u64,
}

fn check_instance(shape: Shape, seed: u64, index: u64, soft: bool) -> Instance {
    let mut rng = rng_for(seed, &[shape.streams as u64, shape.rx as u64, index]);
    let snr_db = rng.random_range(0.0..30.0);
    let ch = sample_channel(shape.rx, shape.streams, snr_db, &mut rng);
    let mix = draw_mix(shape.streams, &mut rng);
    let x: Vec<Complex64> = mix.iter().map(|c| c.points()[rng.random_range(0..c.len())]).collect();
    let y = ch.apply(&x, &mut rng).expect("one symbol per stream");

    let pre = preprocess(&ch, &mix);
    let y_eff = pre.rotate(&y);
    let (hard, mut nodes) = sphere_detect_hard(&pre, &y_eff);
    let hard_ok = hard == brute_force_hard(&ch, &y, &mix);

    let (mut soft_ok, mut llr_error) = (true, 0.0f64);
    if soft {
        let det = sphere_detect_soft(&pre, &y_eff, SoftOptions { llr_clip: f64::INFINITY });
        let (ml, exact) = brute_force_maxlog(&ch, &y, &mix);
        soft_ok = det.hard_decision == ml;
        for (a, b) in det.llrs.iter().flatten().zip(exact.iter().flatten()) {
            llr_error = llr_error.max((a - b).abs() / b.abs().max(1.0));
            soft_ok &= llr_close(*a, *b);
        }
        nodes += det.nodes_visited;
    }
    Instance {
        hard_ok,
        soft_ok,
        llr_error,
        nodes,
        hypotheses: joint_hypotheses(&mix),
    }
}

/// Checks `instances` random problems of one shape. Hard decisions are
/// always compared; `soft` also compares unclipped max-log LLRs.
pub fn check_shape(shape: Shape, instances: usize, seed: u64, soft: bool) -> ShapeReport {
    let results: Vec<Instance> = (0..instances as u64)
        .into_par_iter()
        .map(|i| check_instance(shape, seed, i, soft))
        .collect();
    ShapeReport {
        shape,
        instances,
        hard_mismatches: results.iter().filter(|r| !r.hard_ok).count(),
        soft_mismatches: results.iter().filter(|r| !r.soft_ok).count(),
        max_llr_error: results.iter().map(|r| r.llr_error).fold(0.0, f64::max),
        mean_nodes: results.iter().map(|r| r.nodes as f64).sum::<f64>() / instances.max(1) as f64,
        max_hypotheses: results.iter().map(|r| r.hypotheses).max().unwrap_or(0),
    }
}
