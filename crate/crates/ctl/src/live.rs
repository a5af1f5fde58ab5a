//! The live simulation loop. It owns all simulation state; control
//! messages arrive through a queue and are applied between frames.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::sync::RwLock;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use nlmimo::ra::{LinkState, McsThresholdTable};
use nlmimo::sim::{run_frame, FrameResult, RaMode, SimError};

use crate::control::{ControlMessage, ErrorEvent, Event, LiveConfig, SnapshotEvent, UserSnapshot};

/// Frames in a statistics window.
pub const WINDOW_FRAMES: usize = 200;

/// Minimum spacing of snapshots (at most 10 per second).
pub const SNAPSHOT_INTERVAL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Control { client: u64, msg: ControlMessage },
    Stop,
}

/// Event with an optional single recipient.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: Option<u64>,
    pub event: Event,
}

/// State readable from outside the loop.
#[derive(Debug)]
pub struct LiveShared {
    config: RwLock<LiveConfig>,
    frames: AtomicU64,
    paused: AtomicBool,
}

impl LiveShared {
    pub fn new(cfg: LiveConfig) -> Self {
        Self {
            config: RwLock::new(cfg),
            frames: AtomicU64::new(0),
            paused: AtomicBool::new(false),
        }
    }

    pub fn config(&self) -> LiveConfig {
        self.config.read().expect("config lock").clone()
    }

    pub fn frames(&self) -> u64 {
        self.frames.load(Ordering::SeqCst)
    }

    pub fn paused(&self) -> bool {
        self.paused.load(Ordering::SeqCst)
    }
}

#[derive(Default)]
struct Stats {
    window: VecDeque<FrameResult>,
    /// Summed Mb/s per user since the last reset.
    throughput: Vec<f64>,
    frames: u64,
}

impl Stats {
    fn new(n_users: usize) -> Self {
        Self {
            window: VecDeque::with_capacity(WINDOW_FRAMES),
            throughput: vec![0.0; n_users],
            frames: 0,
        }
    }

    fn push(&mut self, r: FrameResult) {
        for (t, u) in self.throughput.iter_mut().zip(&r.users) {
            *t += u.throughput();
        }
        self.frames += 1;
        if self.window.len() == WINDOW_FRAMES {
            self.window.pop_front();
        }
        self.window.push_back(r);
    }

    fn snapshot(&self, cfg: &LiveConfig, states: &[LinkState], frame: u64, paused: bool) -> SnapshotEvent {
        let w = self.window.len();
        let per_frame = |x: f64, frames: f64| if frames == 0.0 { 0.0 } else { x / frames };
        let users = (0..cfg.n_users)
            .map(|u| {
                let tp: f64 = self.window.iter().map(|f| f.users[u].throughput()).sum();
                let fails = self.window.iter().filter(|f| !f.users[u].crc_pass).count();
                UserSnapshot {
                    user: u,
                    throughput_window: per_frame(tp, w as f64),
                    bler_window: per_frame(fails as f64, w as f64),
                    mcs_current: states[u].current_mcs,
                    throughput_mean: per_frame(self.throughput[u], self.frames as f64),
                }
            })
            .collect();
        let nodes: u64 = self.window.iter().map(|f| f.sd_nodes).sum();
        SnapshotEvent {
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            frame,
            paused,
            detector: cfg.detector,
            ra_mode: cfg.ra_mode,
            n_users: cfg.n_users,
            n_rx: cfg.n_rx,
            snr_db: cfg.snr_db,
            window_frames: w,
            sd_nodes_window: per_frame(nodes as f64, w as f64),
            frames_since_reset: self.frames,
            users,
        }
    }
}

fn link_states(n: usize) -> Vec<LinkState> {
    (0..n).map(LinkState::new).collect()
}

/// Runs frames until a [`Command::Stop`] arrives or the inbox closes.
///
/// Frame `i` of the loop is frame `i` of a one-point batch run with the
/// same parameters, so an undisturbed loop reproduces `run` exactly.
pub fn live_loop(
    init: LiveConfig,
    thresholds: Option<McsThresholdTable>,
    inbox: Receiver<Command>,
    shared: &LiveShared,
    mut emit: impl FnMut(Outbound),
) {
    let mut cfg = init;
    let mut states = link_states(cfg.n_users);
    let mut stats = Stats::new(cfg.n_users);
    let mut frame = 0u64;
    let mut paused = false;
    let mut last_emit: Option<Instant> = None;
    let mut dirty = true;

    loop {
        let cmd = if paused {
            match inbox.recv_timeout(SNAPSHOT_INTERVAL) {
                Ok(c) => Some(c),
                Err(RecvTimeoutError::Timeout) => None,
                Err(RecvTimeoutError::Disconnected) => return,
            }
        } else {
            match inbox.try_recv() {
                Ok(c) => Some(c),
                Err(TryRecvError::Empty) => None,
                Err(TryRecvError::Disconnected) => return,
            }
        };

        match cmd {
            Some(Command::Stop) => return,
            Some(Command::Control { client, msg }) => {
                let reject = |code: &str, reason: String| Outbound {
                    to: Some(client),
                    event: Event::Error(ErrorEvent::new(code, reason, Some(msg.kind()))),
                };
                match msg.apply(&cfg) {
                    Some(Err(e)) => emit(reject(e.code(), e.to_string())),
                    Some(Ok(next)) if next.ra_mode == RaMode::Adaptive && thresholds.is_none() => emit(reject(
                        "calibrate",
                        "adaptive mode needs a threshold table; run `calibrate` first".into(),
                    )),
                    Some(Ok(next)) => {
                        if !next.same_topology(&cfg) {
                            states = link_states(next.n_users);
                            stats = Stats::new(next.n_users);
                        }
                        cfg = next;
                        *shared.config.write().expect("config lock") = cfg.clone();
                    }
                    None => match msg {
                        ControlMessage::Pause => paused = true,
                        ControlMessage::Resume => paused = false,
                        ControlMessage::ResetStats => stats = Stats::new(cfg.n_users),
                        _ => unreachable!("parameter messages return Some"),
                    },
                }
                shared.paused.store(paused, Ordering::SeqCst);
                dirty = true;
                // apply everything already queued before the next frame
                continue;
            }
            None => {}
        }

        if !paused {
            let sim = cfg.to_sim(1);
            match run_frame(&sim, 0, frame, &mut states, thresholds.as_ref()) {
                Ok(r) => stats.push(r),
                Err(e) => {
                    paused = true;
                    shared.paused.store(true, Ordering::SeqCst);
                    emit(Outbound {
                        to: None,
                        event: Event::Error(ErrorEvent::new(error_code(&e), e.to_string(), None)),
                    });
                }
            }
            frame += 1;
            shared.frames.store(frame, Ordering::SeqCst);
            dirty = true;
        }

        let due = last_emit.is_none_or(|t| t.elapsed() >= SNAPSHOT_INTERVAL);
        if due && (dirty || paused) {
            emit(Outbound {
                to: None,
                event: Event::Snapshot(stats.snapshot(&cfg, &states, frame, paused)),
            });
            last_emit = Some(Instant::now());
            dirty = false;
        }
    }
}

fn error_code(e: &SimError) -> &'static str {
    match e {
        SimError::Config(c) => c.code(),
        SimError::MissingThresholds => "calibrate",
        _ => "frame",
    }
}
