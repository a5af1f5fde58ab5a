//! Zero-forcing and MMSE detection with per-stream post-detection SINR and
//! max-log demapping under an effective AWGN model.

use num_complex::Complex64;

use super::{clip_llr, DetectError, LlrVector, LLR_CLIP};
use crate::channel::ChannelRealization;
use crate::linalg::{qr_decompose, Cholesky, ComplexMatrix, LinalgError};
use crate::modem::Constellation;

/// Floor on reported SINR so that it stays strictly positive.
const MIN_SINR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearKind {
    Zf,
    Mmse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDetectionResult {
    /// Unbiased per-stream symbol estimates.
    pub soft_symbols: Vec<Complex64>,
    /// Per-stream post-detection SINR, linear scale.
    pub post_sinr: Vec<f64>,
    pub llrs: Vec<LlrVector>,
}

/// Linear receiver for one channel realization. The filter and SINRs are
/// computed once and reused for every received vector in the block.
#[derive(Debug, Clone)]
pub struct LinearDetector {
    kind: LinearKind,
    /// n_streams x n_rx, rows already scaled to be unbiased.
    filter: ComplexMatrix,
    post_sinr: Vec<f64>,
}

fn upper_triangular_inverse(r: &ComplexMatrix) -> ComplexMatrix {
    let n = r.rows();
    let mut inv = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = Complex64::new(1.0 / r[(j, j)].re, 0.0);
        for i in (0..j).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in (i + 1)..=j {
                s += r[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / r[(i, i)].re;
        }
    }
    inv
}

/// Biased MMSE filter `(H^H H + noise_var I)^-1 H^H`.
pub fn mmse_filter(ch: &ChannelRealization) -> ComplexMatrix {
    let inv = regularized_gram_inverse(ch);
    inv.matmul(&ch.h.adjoint()).expect("shapes agree")
}

/// `(H^H H + noise_var I)^-1`.
fn regularized_gram_inverse(ch: &ChannelRealization) -> ComplexMatrix {
    let mut a = ch.h.gram();
    for k in 0..a.rows() {
        a[(k, k)] += ch.noise_var;
    }
    Cholesky::new(&a)
        .expect("regularized Gram matrix is positive definite")
        .inverse()
}

/// Unbiased post-MMSE SINR per stream:
/// `1 / [(I + H^H H / noise_var)^-1]_kk - 1`.
pub fn mmse_sinr(ch: &ChannelRealization) -> Vec<f64> {
    let inv = regularized_gram_inverse(ch);
    (0..inv.rows())
        .map(|k| (1.0 / (ch.noise_var * inv[(k, k)].re) - 1.0).max(MIN_SINR))
        .collect()
}

impl LinearDetector {
    pub fn zf(ch: &ChannelRealization) -> Result<Self, DetectError> {
        if ch.n_streams() > ch.n_rx() {
            return Err(DetectError::RankDeficient(format!(
                "{} streams on {} receive antennas",
                ch.n_streams(),
                ch.n_rx()
            )));
        }
        let (q, r) = qr_decompose(&ch.h).map_err(|e| match e {
            LinalgError::RankDeficient { .. } => DetectError::RankDeficient(e.to_string()),
            other => DetectError::Linalg(other),
        })?;
        let r_inv = upper_triangular_inverse(&r);
        // (H^H H)^-1 = R^-1 R^-H, so its diagonal is the row energy of R^-1
        let post_sinr = (0..r.rows())
            .map(|k| {
                let d: f64 = r_inv.row(k).iter().map(|z| z.norm_sqr()).sum();
                (1.0 / (ch.noise_var * d)).max(MIN_SINR)
            })
            .collect();
        let filter = r_inv.matmul(&q.adjoint()).expect("shapes agree");
        Ok(Self {
            kind: LinearKind::Zf,
            filter,
            post_sinr,
        })
    }

    pub fn mmse(ch: &ChannelRealization) -> Self {
        let inv = regularized_gram_inverse(ch);
        let mut filter = inv.matmul(&ch.h.adjoint()).expect("shapes agree");
        let mut post_sinr = Vec::with_capacity(inv.rows());
        for k in 0..inv.rows() {
            let e = ch.noise_var * inv[(k, k)].re;
            // diagonal of W H equals 1 - noise_var [A^-1]_kk
            let bias = (1.0 - e).max(MIN_SINR);
            for j in 0..filter.cols() {
                filter[(k, j)] /= bias;
            }
            post_sinr.push((1.0 / e - 1.0).max(MIN_SINR));
        }
        Self {
            kind: LinearKind::Mmse,
            filter,
            post_sinr,
        }
    }

    pub fn new(kind: LinearKind, ch: &ChannelRealization) -> Result<Self, DetectError> {
        match kind {
            LinearKind::Zf => Self::zf(ch),
            LinearKind::Mmse => Ok(Self::mmse(ch)),
        }
    }

    pub fn kind(&self) -> LinearKind {
        self.kind
    }

    pub fn post_sinr(&self) -> &[f64] {
        &self.post_sinr
    }

    pub fn equalize(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.filter.mul_vec(y).expect("received vector has n_rx entries")
    }

    pub fn detect(&self, y: &[Complex64], constellations: &[&Constellation]) -> LinearDetectionResult {
        assert_eq!(constellations.len(), self.post_sinr.len());
        let soft_symbols = self.equalize(y);
        let llrs = soft_symbols
            .iter()
            .zip(&self.post_sinr)
            .zip(constellations)
            .map(|((&z, &sinr), c)| awgn_maxlog_llr(z, sinr, c))
            .collect();
        LinearDetectionResult {
            soft_symbols,
            post_sinr: self.post_sinr.clone(),
            llrs,
        }
    }
}

pub fn zf_detect(
    ch: &ChannelRealization,
    y: &[Complex64],
    constellations: &[&Constellation],
) -> Result<LinearDetectionResult, DetectError> {
    Ok(LinearDetector::zf(ch)?.detect(y, constellations))
}

pub fn mmse_detect(
    ch: &ChannelRealization,
    y: &[Complex64],
    constellations: &[&Constellation],
) -> LinearDetectionResult {
    LinearDetector::mmse(ch).detect(y, constellations)
}

/// Max-log bit LLRs of `z = s + e` with `e ~ CN(0, 1/sinr)`:
/// `sinr * (min_{b=1} |z-s|^2 - min_{b=0} |z-s|^2)`, clipped.
pub fn awgn_maxlog_llr(z: Complex64, sinr: f64, c: &Constellation) -> LlrVector {
    let mut out = Vec::with_capacity(c.bits_per_symbol());
    awgn_maxlog_llr_into(z, sinr, c, &mut out);
    out
}

/// Appending form of [`awgn_maxlog_llr`].
pub fn awgn_maxlog_llr_into(z: Complex64, sinr: f64, c: &Constellation, out: &mut Vec<f64>) {
    let m = c.bits_per_symbol();
    let mut best = [[f64::INFINITY; 2]; 8];
    for (label, p) in c.points().iter().enumerate() {
        let d = (z - p).norm_sqr();
        for (i, slot) in best.iter_mut().enumerate().take(m) {
            let b = c.bit(label, i) as usize;
            if d < slot[b] {
                slot[b] = d;
            }
        }
    }
    out.extend(
        best[..m]
            .iter()
            .map(|[d0, d1]| clip_llr(sinr * (d1 - d0), LLR_CLIP)),
    );
}
