//! Binary exponential backoff shared by DCF basic, RTS/CTS and SH-TXOP.

use rand::Rng;

use crate::error::{Error, Result};
use crate::medium::{Feedback, Observation, SlotOutcome};
use crate::rng::SimRng;
use crate::ApId;

/// What one AP learned from a contention slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotView {
    pub transmitted: bool,
    pub observation: Observation,
    /// Meaningful only when `transmitted`.
    pub success: bool,
}

impl SlotView {
    pub const IDLE: SlotView = SlotView {
        transmitted: false,
        observation: Observation::Idle,
        success: false,
    };
    pub const BUSY: SlotView = SlotView {
        transmitted: false,
        observation: Observation::Busy,
        success: false,
    };

    pub fn sent(success: bool) -> Self {
        SlotView {
            transmitted: true,
            observation: Observation::Busy,
            success,
        }
    }
}

/// Uniform per-slot interface: decide whether to transmit, then learn the
/// slot's outcome.
pub trait AccessProtocol {
    fn decide(&self) -> bool;
    fn notify(&mut self, view: SlotView, rng: &mut SimRng);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackoffState {
    cw_min: u32,
    m: u32,
    current_cw: u32,
    counter: u32,
    frozen: bool,
}

impl BackoffState {
    /// Fresh state with the counter drawn from `[0, cw_min - 1]`.
    pub fn new<R: Rng>(cw_min: u32, m: u32, rng: &mut R) -> Result<Self> {
        let mut s = Self::with_counter(cw_min, m, cw_min, 0)?;
        s.counter = rng.random_range(0..cw_min);
        Ok(s)
    }

    pub fn with_counter(cw_min: u32, m: u32, current_cw: u32, counter: u32) -> Result<Self> {
        if cw_min == 0 || m > 16 {
            return Err(Error::Config(format!("invalid backoff window W={cw_min}, m={m}")));
        }
        let cw_max = cw_min
            .checked_shl(m)
            .filter(|c| c >> m == cw_min)
            .ok_or_else(|| Error::Config(format!("CW_max overflows for W={cw_min}, m={m}")))?;
        if current_cw < cw_min || current_cw > cw_max || counter >= current_cw {
            return Err(Error::Config(format!(
                "backoff state out of range: cw {current_cw} in [{cw_min}, {cw_max}], counter {counter}"
            )));
        }
        Ok(Self {
            cw_min,
            m,
            current_cw,
            counter,
            frozen: false,
        })
    }

    pub fn cw_min(&self) -> u32 {
        self.cw_min
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn cw_max(&self) -> u32 {
        self.cw_min << self.m
    }

    pub fn current_cw(&self) -> u32 {
        self.current_cw
    }

    pub fn counter(&self) -> u32 {
        self.counter
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }
}

impl AccessProtocol for BackoffState {
    fn decide(&self) -> bool {
        self.counter == 0
    }

    fn notify(&mut self, view: SlotView, rng: &mut SimRng) {
        if view.transmitted {
            self.current_cw = if view.success {
                self.cw_min
            } else {
                (self.current_cw * 2).min(self.cw_max())
            };
            self.counter = rng.random_range(0..self.current_cw);
            self.frozen = false;
        } else if view.observation == Observation::Busy {
            self.frozen = true;
        } else {
            self.frozen = false;
            self.counter = self.counter.saturating_sub(1);
        }
    }
}

fn step(state: &BackoffState, ap: ApId, slot: &SlotOutcome, success: Feedback, rng: &mut SimRng) -> (bool, BackoffState) {
    let feedback = slot.feedback[ap];
    let view = if feedback == Feedback::None {
        SlotView {
            transmitted: false,
            observation: slot.observations[ap],
            success: false,
        }
    } else {
        SlotView::sent(feedback == success)
    };
    let mut next = state.clone();
    next.notify(view, rng);
    (next.decide(), next)
}

/// Applies the outcome of `slot` to `state` and returns whether the AP
/// transmits in the next slot. A basic-access transmission succeeds on ACK.
pub fn dcf_basic_step(state: &BackoffState, ap: ApId, slot: &SlotOutcome, rng: &mut SimRng) -> (bool, BackoffState) {
    step(state, ap, slot, Feedback::Ack, rng)
}

/// As [`dcf_basic_step`], but the transmission is an RTS and succeeds when
/// a CTS comes back.
pub fn rts_cts_step(state: &BackoffState, ap: ApId, slot: &SlotOutcome, rng: &mut SimRng) -> (bool, BackoffState) {
    step(state, ap, slot, Feedback::Cts, rng)
}
