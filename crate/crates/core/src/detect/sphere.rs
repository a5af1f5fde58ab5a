//! Depth-first sphere decoding over the joint multi-user constellation.
//!
//! The search runs on the MMSE-extended system `[H; sqrt(noise_var) I]`, so
//! the metric of a candidate `s` is
//!
//! ```text
//! m(s) = |y - H s|^2 + noise_var |s|^2
//! ```
//!
//! up to a constant that does not depend on `s`. The extended matrix has full
//! column rank for any positive noise variance, which lets overloaded
//! channels (more streams than receive antennas) go through the same code
//! path as square ones.
//!
//! Children at each level are visited in Schnorr-Euchner order (increasing
//! partial distance) and the radius shrinks to the best complete candidate
//! found so far. Soft output uses one unconstrained search for the
//! regularized-ML point followed by one constrained search per bit for the
//! best counter-hypothesis. All searches share a per-bit table of the best
//! metrics seen at any leaf, which seeds the radius of later searches.

use num_complex::Complex64;

use super::linear::mmse_sinr;
use super::{clip_llr, LlrVector, LLR_CLIP};
use crate::channel::ChannelRealization;
use crate::linalg::{qr_decompose, ComplexMatrix};
use crate::modem::Constellation;

/// Channel-dependent part of the search: ordered, regularized QR factors.
#[derive(Debug, Clone)]
pub struct SearchPreprocess {
    /// n_streams x n_streams upper triangular, real positive diagonal.
    pub r: ComplexMatrix,
    /// Top n_rx rows of Q; `y_eff = q_top^H y`.
    q_top_adj: ComplexMatrix,
    /// `perm[level]` is the stream detected at tree level `level`; the root
    /// is the last level.
    pub perm: Vec<usize>,
    pub regularized: bool,
    pub noise_var: f64,
    /// Constellation points pre-multiplied by `r[l][l]`, per level.
    scaled_points: Vec<Vec<Complex64>>,
    level_constellations: Vec<&'static Constellation>,
}

/// Builds the search preprocessing for one channel block.
///
/// Streams are ordered by ascending post-MMSE SINR so that the strongest
/// stream sits at the tree root.
pub fn preprocess(ch: &ChannelRealization, constellations: &[&'static Constellation]) -> SearchPreprocess {
    let n = ch.n_streams();
    assert_eq!(constellations.len(), n, "one constellation per stream");
    let sinr = mmse_sinr(ch);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&a, &b| sinr[a].total_cmp(&sinr[b]).then(a.cmp(&b)));

    let hp = ch.h.permute_columns(&perm);
    let sigma = ch.noise_var.sqrt();
    let reg = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(sigma, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let extended = hp.vstack(&reg);
    let (q, r) = qr_decompose(&extended).expect("regularized matrix has full column rank");
    let n_rx = ch.n_rx();
    let q_top_adj = ComplexMatrix::from_fn(n, n_rx, |i, j| q[(j, i)].conj());

    let level_constellations: Vec<&'static Constellation> = perm.iter().map(|&u| constellations[u]).collect();
    let scaled_points = level_constellations
        .iter()
        .enumerate()
        .map(|(l, c)| c.points().iter().map(|p| p * r[(l, l)].re).collect())
        .collect();

    SearchPreprocess {
        r,
        q_top_adj,
        perm,
        regularized: true,
        noise_var: ch.noise_var,
        scaled_points,
        level_constellations,
    }
}

impl SearchPreprocess {
    pub fn n_streams(&self) -> usize {
        self.perm.len()
    }

    /// Rotates a received vector into the triangular system.
    pub fn rotate(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.q_top_adj.mul_vec(y).expect("received vector has n_rx entries")
    }

    /// Number of nodes in the full (unpruned) search tree.
    pub fn tree_nodes(&self) -> u64 {
        let mut total = 0u64;
        let mut width = 1u64;
        for c in self.level_constellations.iter().rev() {
            width *= c.len() as u64;
            total += width;
        }
        total
    }

    /// Number of joint hypotheses.
    pub fn joint_hypotheses(&self) -> u64 {
        self.level_constellations.iter().map(|c| c.len() as u64).product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlDetectionResult {
    /// Symbol label per stream (stream order).
    pub hard_decision: Vec<usize>,
    /// Max-log LLRs per stream, clipped.
    pub llrs: Vec<LlrVector>,
    pub nodes_visited: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftOptions {
    /// LLR magnitude clip. Counter-hypotheses farther than
    /// `clip * noise_var` from the ML metric are not searched for. Use
    /// `f64::INFINITY` for exact, unclipped max-log values.
    pub llr_clip: f64,
}

impl Default for SoftOptions {
    fn default() -> Self {
        Self { llr_clip: LLR_CLIP }
    }
}

/// Constraint on one bit of the label chosen at one level.
#[derive(Debug, Clone, Copy)]
struct BitConstraint {
    level: usize,
    bit: usize,
    value: u8,
}

/// Reusable search workspace.
struct Searcher<'a> {
    pre: &'a SearchPreprocess,
    y: &'a [Complex64],
    n: usize,
    /// Sorted (partial cost, label) children per level.
    children: Vec<Vec<(f64, u8)>>,
    next_child: Vec<usize>,
    /// Accumulated metric down to and including each level.
    partial: Vec<f64>,
    symbols: Vec<Complex64>,
    labels: Vec<u8>,
    nodes: u64,
}

impl<'a> Searcher<'a> {
    fn new(pre: &'a SearchPreprocess, y: &'a [Complex64]) -> Self {
        let n = pre.n_streams();
        assert_eq!(y.len(), n, "rotated receive vector has n_streams entries");
        Self {
            pre,
            y,
            n,
            children: pre
                .level_constellations
                .iter()
                .map(|c| Vec::with_capacity(c.len()))
                .collect(),
            next_child: vec![0; n],
            partial: vec![0.0; n],
            symbols: vec![Complex64::new(0.0, 0.0); n],
            labels: vec![0; n],
            nodes: 0,
        }
    }

    /// Fills the sorted child list of `level`, given the symbols chosen at
    /// all higher levels. Children whose partial metric already reaches
    /// `budget` are dropped; the radius never grows, so they stay pruned.
    fn expand(&mut self, level: usize, budget: f64, constraint: Option<BitConstraint>) {
        let r = &self.pre.r;
        let mut b = self.y[level];
        for j in (level + 1)..self.n {
            b -= r[(level, j)] * self.symbols[j];
        }
        let c = self.pre.level_constellations[level];
        let list = &mut self.children[level];
        list.clear();
        let filter = constraint.filter(|k| k.level == level);
        for (label, sp) in self.pre.scaled_points[level].iter().enumerate() {
            if let Some(k) = filter {
                if c.bit(label, k.bit) != k.value {
                    continue;
                }
            }
            let d = b - sp;
            let cost = d.re * d.re + d.im * d.im;
            if cost < budget {
                list.push((cost, label as u8));
            }
        }
        list.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        self.next_child[level] = 0;
    }

    /// Depth-first search for leaves with metric strictly below `radius`.
    /// `on_leaf` receives the labels (per level) and metric of every such
    /// leaf and returns the new radius.
    fn run(
        &mut self,
        mut radius: f64,
        constraint: Option<BitConstraint>,
        mut on_leaf: impl FnMut(&[u8], f64) -> f64,
    ) {
        let n = self.n;
        let top = n - 1;
        let mut level = top;
        self.expand(level, radius, constraint);
        loop {
            let parent = if level == top { 0.0 } else { self.partial[level + 1] };
            let idx = self.next_child[level];
            if idx < self.children[level].len() {
                let (cost, label) = self.children[level][idx];
                self.next_child[level] = idx + 1;
                let m = parent + cost;
                if m >= radius {
                    // children are sorted, so the rest of this level is out too
                    self.next_child[level] = self.children[level].len();
                    continue;
                }
                self.nodes += 1;
                self.partial[level] = m;
                self.labels[level] = label;
                self.symbols[level] = self.pre.level_constellations[level].points()[label as usize];
                if level == 0 {
                    radius = on_leaf(&self.labels, m);
                } else {
                    level -= 1;
                    self.expand(level, radius - m, constraint);
                }
            } else if level == top {
                break;
            } else {
                level += 1;
            }
        }
    }
}

fn labels_to_streams(pre: &SearchPreprocess, per_level: &[u8]) -> Vec<usize> {
    let mut out = vec![0; pre.n_streams()];
    for (level, &stream) in pre.perm.iter().enumerate() {
        out[stream] = per_level[level] as usize;
    }
    out
}

/// Regularized-ML hard decision: per-stream labels minimising
/// `|y - H s|^2 + noise_var |s|^2`. Takes the rotated vector from
/// [`SearchPreprocess::rotate`].
pub fn sphere_detect_hard(pre: &SearchPreprocess, y_eff: &[Complex64]) -> (Vec<usize>, u64) {
    let mut s = Searcher::new(pre, y_eff);
    let mut best: Option<Vec<u8>> = None;
    s.run(f64::INFINITY, None, |labels, m| {
        best = Some(labels.to_vec());
        m
    });
    let best = best.expect("unconstrained search always reaches a leaf");
    (labels_to_streams(pre, &best), s.nodes)
}

/// Max-log soft output:
/// `LLR_b = (min_{s: b=1} m(s) - min_{s: b=0} m(s)) / noise_var`, clipped.
pub fn sphere_detect_soft(pre: &SearchPreprocess, y_eff: &[Complex64], opts: SoftOptions) -> NlDetectionResult {
    let n = pre.n_streams();
    // Global bit index of (level, bit).
    let offsets: Vec<usize> = pre
        .level_constellations
        .iter()
        .scan(0, |acc, c| {
            let o = *acc;
            *acc += c.bits_per_symbol();
            Some(o)
        })
        .collect();
    let total_bits: usize = pre.level_constellations.iter().map(|c| c.bits_per_symbol()).sum();
    // best[g][v]: smallest metric of any visited leaf whose bit g equals v
    let mut best = vec![[f64::INFINITY; 2]; total_bits];

    let update = |best: &mut Vec<[f64; 2]>, labels: &[u8], m: f64| {
        for (level, &label) in labels.iter().enumerate() {
            let c = pre.level_constellations[level];
            let base = offsets[level];
            for i in 0..c.bits_per_symbol() {
                let slot = &mut best[base + i][c.bit(label as usize, i) as usize];
                if m < *slot {
                    *slot = m;
                }
            }
        }
    };

    let mut s = Searcher::new(pre, y_eff);
    let mut ml_labels = vec![0u8; n];
    let mut ml_metric = f64::INFINITY;
    s.run(f64::INFINITY, None, |labels, m| {
        update(&mut best, labels, m);
        if m < ml_metric {
            ml_metric = m;
            ml_labels.copy_from_slice(labels);
        }
        ml_metric
    });

    let cap = if opts.llr_clip.is_finite() {
        ml_metric + opts.llr_clip * pre.noise_var
    } else {
        f64::INFINITY
    };

    let mut llr_levels: Vec<LlrVector> = Vec::with_capacity(n);
    for level in 0..n {
        let c = pre.level_constellations[level];
        let mut llrs = Vec::with_capacity(c.bits_per_symbol());
        for bit in 0..c.bits_per_symbol() {
            let g = offsets[level] + bit;
            let ml_bit = c.bit(ml_labels[level] as usize, bit);
            let counter = 1 - ml_bit;
            let start = best[g][counter as usize].min(cap);
            let constraint = BitConstraint {
                level,
                bit,
                value: counter,
            };
            s.run(start, Some(constraint), |labels, m| {
                update(&mut best, labels, m);
                m
            });
            let lambda = best[g][counter as usize];
            let delta = (lambda - ml_metric) / pre.noise_var;
            let llr = if ml_bit == 0 { delta } else { -delta };
            llrs.push(clip_llr(llr, opts.llr_clip));
        }
        llr_levels.push(llrs);
    }

    let mut llrs = vec![Vec::new(); n];
    for (level, l) in llr_levels.into_iter().enumerate() {
        llrs[pre.perm[level]] = l;
    }
    NlDetectionResult {
        hard_decision: labels_to_streams(pre, &ml_labels),
        llrs,
        nodes_visited: s.nodes,
    }
}
