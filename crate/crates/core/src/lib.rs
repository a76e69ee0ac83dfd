//! Slotted simulator of dense overlapping multi-AP Wi-Fi networks.
//!
//! Four channel-access schemes share one medium model: DCF basic access,
//! DCF with RTS/CTS, shared TXOP (SH-TXOP) and DLCA, where every AP runs a
//! small deep Q-network in place of binary exponential backoff while a
//! central controller assigns primary channels for proportional fairness
//! and periodically merges the agents' networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`timing`], [`channel`], [`medium`] and [`rng`]: slot durations,
//!   spectral efficiencies, per-slot contention resolution, seeded streams.
//! * [`protocols`]: backoff state machines, SH-TXOP rounds, the DLCA slot.
//! * [`qnn`] and [`agent`]: the Q-network and the per-AP learner.
//! * [`apc`]: greedy proportional-fair allocation and network merging.
//! * [`analytics`]: closed-form throughput model and run metrics.
//! * [`engine`] and [`scenario`]: protocol drivers, configs, presets, CSV.

pub mod agent;
pub mod analytics;
pub mod apc;
pub mod channel;
pub mod engine;
pub mod error;
pub mod medium;
pub mod protocols;
pub mod qnn;
pub mod rng;
pub mod scenario;
pub mod timing;

/// Index of an access point, `0..N`.
pub type ApId = usize;
/// Index of a 20 MHz channel, `0..F`.
pub type ChannelId = usize;

pub use error::{Error, Result};
