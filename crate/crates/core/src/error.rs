use thiserror::Error;

use crate::{ApId, ChannelId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("AP {ap} intends channel {channel} but is assigned channel {assigned}")]
    WrongChannel {
        ap: ApId,
        channel: ChannelId,
        assigned: ChannelId,
    },

    #[error("non-finite network input at index {0}")]
    NonFiniteInput(usize),

    #[error("training diverged: loss is {0}")]
    Divergence(f64),

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("average-throughput update needs t >= 1")]
    ZeroSlotIndex,

    #[error("network utility undefined: AP {ap} has average rate {rate}")]
    UndefinedUtility { ap: ApId, rate: f64 },

    #[error("PF ratio needs a positive achievable rate, got {0}")]
    ZeroAchievableRate(f64),

    #[error("contention fixed point did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("malformed parameter snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
