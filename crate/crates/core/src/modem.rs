//! Square-QAM constellations with per-axis Gray labelling, and the MCS table.
//!
//! A symbol label is the integer whose bits, read MSB first, are the bit
//! group carried by the symbol. The first half of the group selects the
//! in-phase level and the second half the quadrature level. On each axis the
//! first bit is the sign (`0` maps to positive) and the remaining bits follow
//! a reflected Gray code from the inside out.

use std::fmt;
use std::sync::LazyLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("{len} bits is not a multiple of {bits_per_symbol} bits per symbol")]
    LengthMismatch { len: usize, bits_per_symbol: usize },
    #[error("no MCS with index {0}")]
    UnknownMcs(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "16QAM")]
    Qam16,
    #[serde(rename = "64QAM")]
    Qam64,
}

impl Scheme {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Scheme::Qpsk => 2,
            Scheme::Qam16 => 4,
            Scheme::Qam64 => 6,
        }
    }

    pub fn constellation(self) -> &'static Constellation {
        static QPSK: LazyLock<Constellation> = LazyLock::new(|| Constellation::build(Scheme::Qpsk));
        static QAM16: LazyLock<Constellation> = LazyLock::new(|| Constellation::build(Scheme::Qam16));
        static QAM64: LazyLock<Constellation> = LazyLock::new(|| Constellation::build(Scheme::Qam64));
        match self {
            Scheme::Qpsk => &QPSK,
            Scheme::Qam16 => &QAM16,
            Scheme::Qam64 => &QAM64,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Qpsk => "QPSK",
            Scheme::Qam16 => "16QAM",
            Scheme::Qam64 => "64QAM",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    scheme: Scheme,
    points: Vec<Complex64>,
}

/// PAM amplitude for the non-sign bits of one axis: `2^k - (1-2c) * rest`.
fn axis_magnitude(bits: &[u8]) -> f64 {
    match bits.split_first() {
        None => 1.0,
        Some((&c, rest)) => {
            let span = (1usize << bits.len()) as f64;
            span - (1.0 - 2.0 * c as f64) * axis_magnitude(rest)
        }
    }
}

fn axis_level(bits: &[u8]) -> f64 {
    let (&sign, rest) = bits.split_first().expect("axis carries at least one bit");
    (1.0 - 2.0 * sign as f64) * axis_magnitude(rest)
}

impl Constellation {
    fn build(scheme: Scheme) -> Self {
        let m = scheme.bits_per_symbol();
        let half = m / 2;
        let levels = 1usize << half;
        // average energy of a square QAM with odd-integer levels
        let energy = 2.0 * ((levels * levels) as f64 - 1.0) / 3.0;
        let scale = energy.sqrt().recip();
        let points = (0..1usize << m)
            .map(|label| {
                let bits: Vec<u8> = (0..m).map(|i| ((label >> (m - 1 - i)) & 1) as u8).collect();
                Complex64::new(axis_level(&bits[..half]), axis_level(&bits[half..])) * scale
            })
            .collect();
        Self { scheme, points }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.scheme.bits_per_symbol()
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bit `i` (0 = first/MSB) of `label`.
    #[inline]
    pub fn bit(&self, label: usize, i: usize) -> u8 {
        ((label >> (self.bits_per_symbol() - 1 - i)) & 1) as u8
    }

    pub fn label_of(&self, bits: &[u8]) -> usize {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    pub fn bits_of(&self, label: usize) -> Vec<u8> {
        (0..self.bits_per_symbol()).map(|i| self.bit(label, i)).collect()
    }

    /// Label of the point closest to `z`.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

pub fn modulate(bits: &[u8], c: &Constellation) -> Result<Vec<Complex64>, ModemError> {
    let m = c.bits_per_symbol();
    if bits.len() % m != 0 {
        return Err(ModemError::LengthMismatch {
            len: bits.len(),
            bits_per_symbol: m,
        });
    }
    Ok(bits.chunks(m).map(|g| c.points[c.label_of(g)]).collect())
}

/// Nearest-point hard demapping back to bits.
pub fn demap_hard(symbols: &[Complex64], c: &Constellation) -> Vec<u8> {
    symbols.iter().flat_map(|&z| c.bits_of(c.nearest(z))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeRate {
    #[serde(rename = "1/2")]
    R1_2,
    #[serde(rename = "2/3")]
    R2_3,
    #[serde(rename = "3/4")]
    R3_4,
    #[serde(rename = "5/6")]
    R5_6,
}

impl CodeRate {
    pub const ALL: [CodeRate; 4] = [CodeRate::R1_2, CodeRate::R2_3, CodeRate::R3_4, CodeRate::R5_6];

    pub fn ratio(self) -> (usize, usize) {
        match self {
            CodeRate::R1_2 => (1, 2),
            CodeRate::R2_3 => (2, 3),
            CodeRate::R3_4 => (3, 4),
            CodeRate::R5_6 => (5, 6),
        }
    }

    pub fn value(self) -> f64 {
        let (n, d) = self.ratio();
        n as f64 / d as f64
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = self.ratio();
        write!(f, "{n}/{d}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: usize,
    pub scheme: Scheme,
    pub code_rate: CodeRate,
    /// Information bits per channel symbol.
    #[serde(rename = "efficiency")]
    pub spectral_efficiency: f64,
}

impl McsEntry {
    pub fn constellation(&self) -> &'static Constellation {
        self.scheme.constellation()
    }
}

static MCS_TABLE: LazyLock<Vec<McsEntry>> = LazyLock::new(|| {
    use CodeRate::*;
    use Scheme::*;
    [
        (Qpsk, R1_2),
        (Qpsk, R3_4),
        (Qam16, R1_2),
        (Qam16, R2_3),
        (Qam16, R3_4),
        (Qam64, R2_3),
        (Qam64, R3_4),
        (Qam64, R5_6),
    ]
    .into_iter()
    .enumerate()
    .map(|(index, (scheme, code_rate))| McsEntry {
        index,
        scheme,
        code_rate,
        spectral_efficiency: scheme.bits_per_symbol() as f64 * code_rate.value(),
    })
    .collect()
});

/// The fixed eight-entry MCS table, ordered by spectral efficiency.
pub fn mcs_table() -> &'static [McsEntry] {
    &MCS_TABLE
}

pub fn mcs(index: usize) -> Result<&'static McsEntry, ModemError> {
    MCS_TABLE.get(index).ok_or(ModemError::UnknownMcs(index))
}

/// Highest valid MCS index.
pub fn max_mcs() -> usize {
    MCS_TABLE.len() - 1
}
