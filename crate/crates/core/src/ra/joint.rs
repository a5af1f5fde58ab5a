//! Greedy joint MCS selection for sphere-decoded users.
//!
//! The per-user threshold choice is first checked with a short probe on
//! the current channel: while some user fails, every failing user steps
//! down one MCS. Then one user at a time is offered a single MCS step up,
//! kept only if the probe at the proposed mix decodes every user's frame.
//! Users that stepped down, or whose raise was refused, are not offered
//! again, so each user moves in one direction only and the number of
//! steps is bounded by `n_users * n_mcs`.

use serde::Serialize;

use super::olla::select_mcs;
use super::{effective_snr_nl, LinkState, McsThresholdTable, RaError};
use crate::channel::ChannelRealization;
use crate::detect::DetectorKind;
use crate::modem::max_mcs;
use crate::rng::{rng_for, stream};
use crate::sim::frame::{pilot_slot, transmit_frame};

/// Probe frames per proposal. With no failure allowed the estimated BLER
/// of an accepted mix is 0 <= 0.1.
pub const PROBE_FRAMES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointSelection {
    pub mcs: Vec<usize>,
    /// MCS chosen from effective SNR alone, before probing.
    pub initial: Vec<usize>,
    pub effective_snr_db: Vec<f64>,
    pub rounds: usize,
    pub probe_frames: usize,
    pub sd_nodes: u64,
}

/// Outcome of one probe frame: per-user CRC results and search nodes.
pub type ProbeOutcome = (Vec<bool>, u64);

/// Runs up to [`PROBE_FRAMES`] probe frames at `mix`, stopping at the
/// first frame with a failed CRC. Returns the failing users, if any.
fn run_probe(
    mix: &[usize],
    probe: &mut impl FnMut(&[usize], u64) -> ProbeOutcome,
    probes: &mut usize,
    nodes: &mut u64,
) -> Option<Vec<usize>> {
    for _ in 0..PROBE_FRAMES {
        let (pass, k) = probe(mix, *probes as u64);
        *probes += 1;
        *nodes += k;
        let failed: Vec<usize> = pass.iter().enumerate().filter(|(_, &p)| !p).map(|(u, _)| u).collect();
        if !failed.is_empty() {
            return Some(failed);
        }
    }
    None
}

/// Greedy selection with a caller-supplied probe. `probe(mix, k)` runs
/// probe frame `k` at `mix`. `margin(u, m)` orders raise proposals, larger
/// first.
pub fn greedy_ascent(
    start: Vec<usize>,
    margin: impl Fn(usize, usize) -> f64,
    mut probe: impl FnMut(&[usize], u64) -> ProbeOutcome,
) -> JointSelection {
    let n = start.len();
    let top = max_mcs();
    let mut mcs = start.clone();
    let mut frozen = vec![false; n];
    let mut rounds = 0;
    let mut probes = 0usize;
    let mut nodes = 0u64;
    let max_rounds = n * (top + 1);

    // descend until the mix survives a probe or nobody can go lower
    while rounds < max_rounds {
        rounds += 1;
        let Some(failed) = run_probe(&mcs, &mut probe, &mut probes, &mut nodes) else {
            break;
        };
        let lowerable: Vec<usize> = failed.into_iter().filter(|&u| mcs[u] > 0).collect();
        if lowerable.is_empty() {
            break;
        }
        for u in lowerable {
            mcs[u] -= 1;
            frozen[u] = true;
        }
    }

    while rounds < max_rounds {
        rounds += 1;
        let mut order: Vec<usize> = (0..n).filter(|&u| !frozen[u] && mcs[u] < top).collect();
        order.sort_by(|&a, &b| margin(b, mcs[b] + 1).total_cmp(&margin(a, mcs[a] + 1)).then(a.cmp(&b)));
        let mut accepted = false;
        for u in order {
            let mut mix = mcs.clone();
            mix[u] += 1;
            if run_probe(&mix, &mut probe, &mut probes, &mut nodes).is_none() {
                mcs = mix;
                accepted = true;
                break;
            }
            frozen[u] = true;
        }
        if !accepted {
            break;
        }
    }
    JointSelection {
        mcs,
        initial: start,
        effective_snr_db: Vec::new(),
        rounds,
        probe_frames: probes,
        sd_nodes: nodes,
    }
}

/// Joint selection on channel `ch`. Randomness for the pilot slot and the
/// probes is drawn from `seed` under `path`.
pub fn select_mcs_joint(
    ch: &ChannelRealization,
    states: &[LinkState],
    table: &McsThresholdTable,
    seed: u64,
    path: &[u64],
) -> Result<JointSelection, RaError> {
    let sub = |tail: &[u64]| [path, tail].concat();
    let (pilots, pilot_nodes) = pilot_slot(ch, &mut rng_for(seed, &sub(&[stream::PILOT])));
    let eff = effective_snr_nl(&pilots, table)?;
    let start: Vec<usize> = states.iter().zip(&eff).map(|(s, &e)| select_mcs(s, e, table)).collect();
    let adjusted: Vec<f64> = states.iter().zip(&eff).map(|(s, &e)| e + s.olla_offset_db).collect();
    let mut sel = greedy_ascent(
        start,
        |u, next| adjusted[u] - table.threshold(next),
        |mix, k| {
            let mut payload = rng_for(seed, &sub(&[stream::PROBE, k, stream::PAYLOAD]));
            let mut noise = rng_for(seed, &sub(&[stream::PROBE, k, stream::NOISE]));
            let out = transmit_frame(ch, DetectorKind::Nl, mix, &mut payload, &mut noise)
                .expect("sphere decoding accepts any shape");
            (out.crc_pass, out.sd_nodes)
        },
    );
    sel.effective_snr_db = eff;
    sel.sd_nodes += pilot_nodes;
    Ok(sel)
}
