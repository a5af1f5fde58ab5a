//! Per-user link state, threshold-based MCS choice and the outer loop.

use std::collections::VecDeque;

use serde::Serialize;

use super::McsThresholdTable;

pub const OLLA_UP_DB: f64 = 0.1 / 9.0;
pub const OLLA_DOWN_DB: f64 = 0.1;
pub const OLLA_LIMIT_DB: f64 = 10.0;
pub const ACK_HISTORY_LEN: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkState {
    pub user_id: usize,
    pub current_mcs: usize,
    pub olla_offset_db: f64,
    /// Most recent outcome last.
    pub ack_history: VecDeque<bool>,
}

impl LinkState {
    pub fn new(user_id: usize) -> Self {
        Self {
            user_id,
            current_mcs: 0,
            olla_offset_db: 0.0,
            ack_history: VecDeque::with_capacity(ACK_HISTORY_LEN),
        }
    }

    /// In-place form of [`outer_loop_update`].
    pub fn record(&mut self, ack: bool) {
        let step = if ack { OLLA_UP_DB } else { -OLLA_DOWN_DB };
        self.olla_offset_db = (self.olla_offset_db + step).clamp(-OLLA_LIMIT_DB, OLLA_LIMIT_DB);
        if self.ack_history.len() == ACK_HISTORY_LEN {
            self.ack_history.pop_front();
        }
        self.ack_history.push_back(ack);
    }

    /// Fraction of NACKs in the history window, `None` when empty.
    pub fn recent_bler(&self) -> Option<f64> {
        if self.ack_history.is_empty() {
            return None;
        }
        let nacks = self.ack_history.iter().filter(|&&a| !a).count();
        Some(nacks as f64 / self.ack_history.len() as f64)
    }
}

#[must_use]
pub fn outer_loop_update(state: &LinkState, ack: bool) -> LinkState {
    let mut next = state.clone();
    next.record(ack);
    next
}

/// Highest MCS whose threshold does not exceed `eff_snr_db + offset`;
/// MCS 0 when none qualifies.
pub fn select_mcs(state: &LinkState, eff_snr_db: f64, table: &McsThresholdTable) -> usize {
    select_mcs_at(eff_snr_db + state.olla_offset_db, table)
}

pub(crate) fn select_mcs_at(snr_db: f64, table: &McsThresholdTable) -> usize {
    table.as_slice().iter().rposition(|&t| t <= snr_db).unwrap_or(0)
}
