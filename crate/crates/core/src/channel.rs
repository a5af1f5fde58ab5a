//! Flat block-fading MIMO channel with a per-user SNR convention.
//!
//! Channel entries are unit-variance circularly-symmetric Gaussian and all
//! constellations have unit average energy, so each user's average receive SNR
//! per antenna is `1 / noise_var`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ComplexMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("expected {expected} transmit symbols, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Fading model used when drawing a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingModel {
    /// i.i.d. Rayleigh block fading.
    #[default]
    Rayleigh,
    /// Every entry of H is 1 (pure AWGN for a 1x1 link).
    Awgn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// n_rx x n_streams.
    pub h: ComplexMatrix,
    pub snr_db: f64,
    pub noise_var: f64,
}

pub fn noise_var_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// One draw of `CN(0, 1)`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws an i.i.d. Rayleigh channel. Overloaded shapes (`n_streams > n_rx`)
/// are allowed.
pub fn sample_channel<R: Rng + ?Sized>(
    n_rx: usize,
    n_streams: usize,
    snr_db: f64,
    rng: &mut R,
) -> ChannelRealization {
    let h = ComplexMatrix::from_fn(n_rx, n_streams, |_, _| complex_gaussian(rng));
    ChannelRealization::new(h, snr_db)
}

impl ChannelRealization {
    pub fn new(h: ComplexMatrix, snr_db: f64) -> Self {
        let noise_var = noise_var_from_snr_db(snr_db);
        assert!(noise_var > 0.0 && noise_var.is_finite(), "snr_db out of range");
        Self { h, snr_db, noise_var }
    }

    pub fn draw<R: Rng + ?Sized>(
        model: FadingModel,
        n_rx: usize,
        n_streams: usize,
        snr_db: f64,
        rng: &mut R,
    ) -> Self {
        match model {
            FadingModel::Rayleigh => sample_channel(n_rx, n_streams, snr_db, rng),
            FadingModel::Awgn => Self::new(
                ComplexMatrix::from_fn(n_rx, n_streams, |_, _| Complex64::new(1.0, 0.0)),
                snr_db,
            ),
        }
    }

    pub fn n_rx(&self) -> usize {
        self.h.rows()
    }

    pub fn n_streams(&self) -> usize {
        self.h.cols()
    }

    /// Applies per-user power offsets (dB) by scaling the user's column.
    pub fn with_user_offsets_db(mut self, offsets_db: &[f64]) -> Self {
        for (j, &off) in offsets_db.iter().enumerate().take(self.n_streams()) {
            if off != 0.0 {
                self.h.scale_column(j, 10f64.powf(off / 20.0));
            }
        }
        self
    }

    /// `y = H x + n`, `n ~ CN(0, noise_var I)`.
    pub fn apply<R: Rng + ?Sized>(
        &self,
        x: &[Complex64],
        rng: &mut R,
    ) -> Result<Vec<Complex64>, ChannelError> {
        if x.len() != self.n_streams() {
            return Err(ChannelError::DimensionMismatch {
                expected: self.n_streams(),
                got: x.len(),
            });
        }
        let sigma = self.noise_var.sqrt();
        let mut y = self.h.mul_vec(x).expect("length checked");
        for v in &mut y {
            *v += complex_gaussian(rng) * sigma;
        }
        Ok(y)
    }
}

/// Free-function form of [`ChannelRealization::apply`].
pub fn apply_channel<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    x: &[Complex64],
    rng: &mut R,
) -> Result<Vec<Complex64>, ChannelError> {
    ch.apply(x, rng)
}
