//! The DLCA contention slot: no backoff, each AP's agent decides directly.

use crate::agent::Action;
use crate::apc::AllocationPlan;
use crate::error::Result;
use crate::medium::{resolve_slot, AccessMode, Intent, SlotOutcome};

/// Resolves one fixed-length DLCA slot given every AP's action.
pub fn dlca_step(actions: &[Action], plan: &AllocationPlan) -> Result<SlotOutcome> {
    let intents: Vec<Intent> = actions
        .iter()
        .zip(&plan.primary_channel)
        .map(|(a, &f)| match a {
            Action::Contend => Intent::Transmit(f),
            Action::Wait => Intent::Wait,
        })
        .collect();
    resolve_slot(&intents, &plan.primary_channel, plan.n_channels(), AccessMode::Dlca)
}
