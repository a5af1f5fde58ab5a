//! One coded multi-user transmission over a block-fading channel.
//!
//! Every user encodes a 512-bit payload at its own MCS. The coded stream is
//! padded with random bits to a whole number of symbols. All users share
//! one slot whose length is that of the longest burst; shorter bursts are
//! filled with random symbols, which still interfere but carry no data.
//! The channel stays constant for the whole slot.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelRealization;
use crate::detect::{preprocess, sphere_detect_soft, DetectError, DetectorKind, LinearDetector, SearchPreprocess, SoftOptions};
use crate::fec::{decode_frame, encode_frame, PAYLOAD_BITS};
use crate::modem::{mcs, modulate, Constellation, McsEntry, Scheme};
use crate::ra::PilotLlrs;
use crate::rng::SimRng;

/// Known QPSK pilot symbols per user in a pilot slot.
pub const PILOT_SYMBOLS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOutcome {
    pub crc_pass: Vec<bool>,
    pub sd_nodes: u64,
}

impl FrameOutcome {
    pub fn all_pass(&self) -> bool {
        self.crc_pass.iter().all(|&p| p)
    }
}

fn entries(mcs_per_user: &[usize]) -> Vec<&'static McsEntry> {
    mcs_per_user.iter().map(|&m| mcs(m).expect("MCS index validated by caller")).collect()
}

/// Symbols needed to carry one coded frame at `entry`.
pub fn burst_symbols(entry: &McsEntry) -> usize {
    crate::fec::frame_coded_len(PAYLOAD_BITS, entry.code_rate).div_ceil(entry.scheme.bits_per_symbol())
}

/// Slot length in channel uses for a given MCS mix.
pub fn slot_length(mcs_per_user: &[usize]) -> usize {
    entries(mcs_per_user).into_iter().map(burst_symbols).max().unwrap_or(0)
}

/// Detector state prepared once per channel block.
enum Receiver {
    Linear(LinearDetector),
    Nl(Box<SearchPreprocess>),
}

impl Receiver {
    fn new(
        kind: DetectorKind,
        ch: &ChannelRealization,
        consts: &[&'static Constellation],
    ) -> Result<Self, DetectError> {
        Ok(match kind.linear_kind() {
            Some(k) => Receiver::Linear(LinearDetector::new(k, ch)?),
            None => Receiver::Nl(Box::new(preprocess(ch, consts))),
        })
    }

    /// Detects one receive vector and appends each user's LLRs. Returns the
    /// number of search nodes visited.
    fn detect_into(&self, y: &[Complex64], consts: &[&'static Constellation], out: &mut [Vec<f64>]) -> u64 {
        match self {
            Receiver::Linear(det) => {
                for (k, r) in det.detect(y, consts).llrs.into_iter().enumerate() {
                    out[k].extend(r);
                }
                0
            }
            Receiver::Nl(pre) => {
                let res = sphere_detect_soft(pre, &pre.rotate(y), SoftOptions::default());
                for (k, r) in res.llrs.into_iter().enumerate() {
                    out[k].extend(r);
                }
                res.nodes_visited
            }
        }
    }
}

fn random_symbol(c: &Constellation, rng: &mut SimRng) -> Complex64 {
    c.points()[rng.random_range(0..c.len())]
}

/// Sends one frame per user at the given MCS mix and decodes it.
///
/// `payload_rng` draws payloads and padding, `noise_rng` draws receiver
/// noise.
pub fn transmit_frame(
    ch: &ChannelRealization,
    detector: DetectorKind,
    mcs_per_user: &[usize],
    payload_rng: &mut SimRng,
    noise_rng: &mut SimRng,
) -> Result<FrameOutcome, DetectError> {
    let n_users = ch.n_streams();
    assert_eq!(mcs_per_user.len(), n_users, "one MCS per user");
    let entries = entries(mcs_per_user);
    let consts: Vec<&'static Constellation> = entries.iter().map(|e| e.constellation()).collect();
    let receiver = Receiver::new(detector, ch, &consts)?;

    let mut payloads = Vec::with_capacity(n_users);
    let mut coded_lens = Vec::with_capacity(n_users);
    let mut bursts = Vec::with_capacity(n_users);
    for (e, c) in entries.iter().zip(&consts) {
        let payload: Vec<u8> = (0..PAYLOAD_BITS).map(|_| payload_rng.random_range(0..2u8)).collect();
        let mut coded = encode_frame(&payload, e.code_rate);
        coded_lens.push(coded.len());
        let bps = c.bits_per_symbol();
        while coded.len() % bps != 0 {
            coded.push(payload_rng.random_range(0..2u8));
        }
        bursts.push(modulate(&coded, c).expect("padded to a symbol multiple"));
        payloads.push(payload);
    }
    let slot = bursts.iter().map(Vec::len).max().unwrap_or(0);
    for (burst, c) in bursts.iter_mut().zip(&consts) {
        while burst.len() < slot {
            burst.push(random_symbol(c, payload_rng));
        }
    }

    let mut llrs: Vec<Vec<f64>> = consts.iter().map(|c| Vec::with_capacity(slot * c.bits_per_symbol())).collect();
    let mut nodes = 0u64;
    let mut x = vec![Complex64::new(0.0, 0.0); n_users];
    for t in 0..slot {
        for (k, b) in bursts.iter().enumerate() {
            x[k] = b[t];
        }
        let y = ch.apply(&x, noise_rng).expect("one symbol per user");
        nodes += receiver.detect_into(&y, &consts, &mut llrs);
    }

    let crc_pass = llrs
        .iter()
        .zip(&entries)
        .zip(&coded_lens)
        .map(|((l, e), &n)| decode_frame(&l[..n], e.code_rate, PAYLOAD_BITS).1)
        .collect();
    Ok(FrameOutcome {
        crc_pass,
        sd_nodes: nodes,
    })
}

/// Detects a slot of known QPSK pilots with the sphere decoder and returns
/// the per-user pilot LLRs alongside the transmitted bits.
pub fn pilot_slot(ch: &ChannelRealization, rng: &mut SimRng) -> (Vec<PilotLlrs>, u64) {
    let n_users = ch.n_streams();
    let qpsk = Scheme::Qpsk.constellation();
    let consts = vec![qpsk; n_users];
    let pre = preprocess(ch, &consts);
    let mut out: Vec<PilotLlrs> = (0..n_users)
        .map(|_| PilotLlrs {
            llrs: Vec::with_capacity(2 * PILOT_SYMBOLS),
            bits: Vec::with_capacity(2 * PILOT_SYMBOLS),
        })
        .collect();
    let mut nodes = 0;
    let mut x = vec![Complex64::new(0.0, 0.0); n_users];
    for _ in 0..PILOT_SYMBOLS {
        for (k, p) in out.iter_mut().enumerate() {
            let label = rng.random_range(0..qpsk.len());
            p.bits.extend(qpsk.bits_of(label));
            x[k] = qpsk.points()[label];
        }
        let y = ch.apply(&x, rng).expect("one symbol per user");
        let res = sphere_detect_soft(&pre, &pre.rotate(&y), SoftOptions::default());
        nodes += res.nodes_visited;
        for (p, l) in out.iter_mut().zip(res.llrs) {
            p.llrs.extend(l);
        }
    }
    (out, nodes)
}
