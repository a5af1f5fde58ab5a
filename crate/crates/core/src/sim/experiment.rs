//! Monte-Carlo sweeps over SNR.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{RaMode, SimConfig};
use super::frame::transmit_frame;
use super::SimError;
use crate::channel::ChannelRealization;
use crate::detect::LinearDetector;
use crate::fec::PAYLOAD_BITS;
use crate::modem::mcs;
use crate::ra::{effective_snr_linear_sinr, select_mcs, select_mcs_joint, LinkState, McsThresholdTable};
use crate::rng::{rng_for, stream};

/// Channel uses per second. Throughput in Mb/s is spectral efficiency times
/// this rate for every decoded frame; the value is only a display scale.
pub const SYMBOL_RATE_MSPS: f64 = 10.0;

pub const CSV_HEADER: &str = "snr_db,user,detector,ra_mode,mcs_mean,throughput,ci95,sd_nodes_mean,seed";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserFrame {
    pub mcs_used: usize,
    pub crc_pass: bool,
    pub info_bits_delivered: usize,
}

impl UserFrame {
    /// Mb/s carried by this frame.
    pub fn throughput(&self) -> f64 {
        if self.crc_pass {
            mcs(self.mcs_used).expect("valid MCS").spectral_efficiency * SYMBOL_RATE_MSPS
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameResult {
    pub users: Vec<UserFrame>,
    /// Search nodes of the data slot; 0 for linear detectors.
    pub sd_nodes: u64,
    /// Search nodes spent on rate selection (pilots and probes).
    pub ra_sd_nodes: u64,
    pub condition_number: f64,
}

impl FrameResult {
    pub fn total_throughput(&self) -> f64 {
        self.users.iter().map(UserFrame::throughput).sum()
    }
}

/// Draws the channel for frame `frame_idx` at SNR point `snr_idx`.
pub fn frame_channel(cfg: &SimConfig, snr_idx: usize, frame_idx: u64) -> ChannelRealization {
    let mut rng = rng_for(cfg.seed, &[snr_idx as u64, frame_idx, stream::CHANNEL]);
    ChannelRealization::draw(cfg.channel, cfg.n_rx, cfg.n_users, cfg.snr_sweep[snr_idx], &mut rng)
        .with_user_offsets_db(&cfg.offsets_db())
}

/// One frame at a given SNR with an explicit channel: rate selection,
/// transmission, decoding and outer-loop update.
pub fn run_frame_on(
    cfg: &SimConfig,
    ch: &ChannelRealization,
    path: &[u64],
    states: &mut [LinkState],
    thresholds: Option<&McsThresholdTable>,
) -> Result<FrameResult, SimError> {
    let n = cfg.n_users;
    let mut ra_nodes = 0;
    let chosen = match cfg.ra_mode {
        RaMode::Static(m) => vec![m; n],
        RaMode::Adaptive => {
            let table = thresholds.ok_or(SimError::MissingThresholds)?;
            match cfg.detector.linear_kind() {
                Some(kind) => {
                    let det = LinearDetector::new(kind, ch)?;
                    effective_snr_linear_sinr(det.post_sinr())
                        .iter()
                        .zip(states.iter())
                        .map(|(&e, s)| select_mcs(s, e, table))
                        .collect()
                }
                None => {
                    let sel = select_mcs_joint(ch, states, table, cfg.seed, path)?;
                    ra_nodes = sel.sd_nodes;
                    sel.mcs
                }
            }
        }
    };
    let sub = |tail: u64| [path, &[tail]].concat();
    let mut payload = rng_for(cfg.seed, &sub(stream::PAYLOAD));
    let mut noise = rng_for(cfg.seed, &sub(stream::NOISE));
    let out = transmit_frame(ch, cfg.detector, &chosen, &mut payload, &mut noise)?;
    let users = chosen
        .iter()
        .zip(&out.crc_pass)
        .zip(states.iter_mut())
        .map(|((&m, &pass), s)| {
            s.current_mcs = m;
            s.record(pass);
            UserFrame {
                mcs_used: m,
                crc_pass: pass,
                info_bits_delivered: if pass { PAYLOAD_BITS } else { 0 },
            }
        })
        .collect();
    Ok(FrameResult {
        users,
        sd_nodes: out.sd_nodes,
        ra_sd_nodes: ra_nodes,
        condition_number: ch.h.condition_estimate(),
    })
}

/// Frame `frame_idx` of SNR point `snr_idx`, fully determined by the seed.
pub fn run_frame(
    cfg: &SimConfig,
    snr_idx: usize,
    frame_idx: u64,
    states: &mut [LinkState],
    thresholds: Option<&McsThresholdTable>,
) -> Result<FrameResult, SimError> {
    let ch = frame_channel(cfg, snr_idx, frame_idx);
    run_frame_on(cfg, &ch, &[snr_idx as u64, frame_idx], states, thresholds)
}

/// Mean and 95% confidence half-width of a sample.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mcs_mean: f64,
    pub throughput: f64,
    pub ci95: f64,
    pub bler: f64,
    pub delivered_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub snr_db: f64,
    pub frames: usize,
    pub users: Vec<Summary>,
    pub total: Summary,
    pub sd_nodes_mean: f64,
    pub ra_sd_nodes_mean: f64,
}

impl PointSummary {
    pub fn from_frames(snr_db: f64, frames: &[FrameResult]) -> Self {
        let n_users = frames.first().map_or(0, |f| f.users.len());
        let nf = frames.len() as f64;
        let users: Vec<Summary> = (0..n_users)
            .map(|u| {
                let tp: Vec<f64> = frames.iter().map(|f| f.users[u].throughput()).collect();
                let (throughput, ci95) = mean_ci95(&tp);
                let fails = frames.iter().filter(|f| !f.users[u].crc_pass).count();
                Summary {
                    mcs_mean: frames.iter().map(|f| f.users[u].mcs_used as f64).sum::<f64>() / nf,
                    throughput,
                    ci95,
                    bler: fails as f64 / nf,
                    delivered_bits: frames.iter().map(|f| f.users[u].info_bits_delivered as u64).sum(),
                }
            })
            .collect();
        let tp: Vec<f64> = frames.iter().map(FrameResult::total_throughput).collect();
        let (throughput, ci95) = mean_ci95(&tp);
        let total = Summary {
            mcs_mean: users.iter().map(|u| u.mcs_mean).sum::<f64>() / n_users.max(1) as f64,
            throughput,
            ci95,
            bler: users.iter().map(|u| u.bler).sum::<f64>() / n_users.max(1) as f64,
            delivered_bits: users.iter().map(|u| u.delivered_bits).sum(),
        };
        Self {
            snr_db,
            frames: frames.len(),
            users,
            total,
            sd_nodes_mean: frames.iter().map(|f| f.sd_nodes as f64).sum::<f64>() / nf,
            ra_sd_nodes_mean: frames.iter().map(|f| f.ra_sd_nodes as f64).sum::<f64>() / nf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub config: SimConfig,
    pub points: Vec<PointSummary>,
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        let det = self.config.detector;
        let ra = self.config.ra_mode;
        let seed = self.config.seed;
        for p in &self.points {
            let rows = p
                .users
                .iter()
                .enumerate()
                .map(|(u, sum)| (u.to_string(), sum))
                .chain(std::iter::once(("all".to_string(), &p.total)));
            for (user, sum) in rows {
                writeln!(
                    s,
                    "{},{user},{det},{ra},{:.6},{:.6},{:.6},{:.3},{seed}",
                    p.snr_db, sum.mcs_mean, sum.throughput, sum.ci95, p.sd_nodes_mean
                )
                .expect("writing to a String");
            }
        }
        s
    }
}

fn run_point(cfg: &SimConfig, snr_idx: usize, thresholds: Option<&McsThresholdTable>) -> Result<PointSummary, SimError> {
    let frames: Vec<FrameResult> = match cfg.ra_mode {
        // frames are independent: any split across workers gives the same list
        RaMode::Static(_) => (0..cfg.frames_per_point as u64)
            .into_par_iter()
            .map(|f| {
                let mut states: Vec<LinkState> = (0..cfg.n_users).map(LinkState::new).collect();
                run_frame(cfg, snr_idx, f, &mut states, thresholds)
            })
            .collect::<Result<_, _>>()?,
        // the outer loop carries state from frame to frame
        RaMode::Adaptive => {
            let mut states: Vec<LinkState> = (0..cfg.n_users).map(LinkState::new).collect();
            (0..cfg.frames_per_point as u64)
                .map(|f| run_frame(cfg, snr_idx, f, &mut states, thresholds))
                .collect::<Result<_, _>>()?
        }
    };
    Ok(PointSummary::from_frames(cfg.snr_sweep[snr_idx], &frames))
}

/// Runs every SNR point of `cfg` on a pool of `workers` threads.
pub fn run_experiment(
    cfg: &SimConfig,
    thresholds: Option<&McsThresholdTable>,
    workers: usize,
) -> Result<ExperimentResult, SimError> {
    cfg.validate()?;
    if cfg.ra_mode == RaMode::Adaptive && thresholds.is_none() {
        return Err(SimError::MissingThresholds);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    let points = pool.install(|| {
        (0..cfg.snr_sweep.len())
            .into_par_iter()
            .map(|i| run_point(cfg, i, thresholds))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        points,
    })
}
