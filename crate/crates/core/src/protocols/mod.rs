//! Channel-access state machines driven slot by slot.

pub mod backoff;
pub mod dlca;
pub mod shtxop;

pub use backoff::{dcf_basic_step, rts_cts_step, AccessProtocol, BackoffState, SlotView};
pub use dlca::dlca_step;
pub use shtxop::{shtxop_round, RoundOutcome, ShTxopPlan, ShTxopRound};
