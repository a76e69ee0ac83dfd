//! Shared TXOP: APs contend on the wide band with basic DCF; the winner
//! announces a sub-channel split and every listed AP transmits at once.

use crate::channel::ChannelModel;
use crate::protocols::backoff::{AccessProtocol, BackoffState, SlotView};
use crate::rng::SimRng;
use crate::{ApId, ChannelId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShTxopPlan {
    pub sharing_ap: ApId,
    /// Next AP after the last one served, wrapping at N.
    pub round_robin_cursor: usize,
    /// `sub_channel_assignment[f]` serves sub-channel `f`; length min(N, F).
    pub sub_channel_assignment: Vec<ApId>,
}

impl ShTxopPlan {
    /// The winner takes sub-channel 0, the following APs (cyclically by id)
    /// take the rest.
    pub fn new(sharing_ap: ApId, n_aps: usize, n_channels: usize) -> Self {
        let k = n_aps.min(n_channels);
        Self {
            sharing_ap,
            round_robin_cursor: (sharing_ap + k) % n_aps,
            sub_channel_assignment: (0..k).map(|f| (sharing_ap + f) % n_aps).collect(),
        }
    }

    /// Bits credited to each served AP for one shared TXOP.
    pub fn credits(&self, channel: &ChannelModel, bandwidth_hz: f64, txop_us: f64) -> Vec<(ApId, ChannelId, f64)> {
        self.sub_channel_assignment
            .iter()
            .enumerate()
            .map(|(f, &ap)| (ap, f, channel.deliver_bits(ap, f, bandwidth_hz, txop_us)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundOutcome {
    Shared(ShTxopPlan),
    /// Several counters hit zero together; the whole TXOP is lost.
    Collision(Vec<ApId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShTxopRound {
    /// Empty backoff slots before the busy period.
    pub idle_slots: u64,
    pub outcome: RoundOutcome,
}

/// Runs wide-band backoff until the first busy period and resolves it.
pub fn shtxop_round(states: &mut [BackoffState], n_channels: usize, rng: &mut SimRng) -> ShTxopRound {
    let n = states.len();
    assert!(n > 0, "SH-TXOP needs at least one AP");
    let mut idle_slots = 0u64;
    loop {
        let ready: Vec<ApId> = (0..n).filter(|&ap| states[ap].decide()).collect();
        if ready.is_empty() {
            idle_slots += 1;
            for s in states.iter_mut() {
                s.notify(SlotView::IDLE, rng);
            }
            continue;
        }
        let success = ready.len() == 1;
        for (ap, s) in states.iter_mut().enumerate() {
            let view = if ready.contains(&ap) {
                SlotView::sent(success)
            } else {
                SlotView::BUSY
            };
            s.notify(view, rng);
        }
        let outcome = if success {
            RoundOutcome::Shared(ShTxopPlan::new(ready[0], n, n_channels))
        } else {
            RoundOutcome::Collision(ready)
        };
        return ShTxopRound { idle_slots, outcome };
    }
}
