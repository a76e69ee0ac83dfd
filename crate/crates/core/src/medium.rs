//! Per-slot contention resolution on a set of orthogonal channels.

use crate::error::{Error, Result};
use crate::{ApId, ChannelId};

/// Channel state as sensed by an AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observation {
    Idle = 0,
    Busy = 1,
}

impl Observation {
    pub fn as_bit(self) -> f64 {
        match self {
            Observation::Idle => 0.0,
            Observation::Busy => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feedback {
    None,
    Ack,
    Cts,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Idle,
    Success(ApId),
    Collision,
}

/// Which frame exchange a contention slot carries. It only changes the
/// feedback a transmitter receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    /// Data sent directly; success acknowledged after the TXOP.
    Basic,
    /// RTS first; success is signalled by the CTS.
    RtsCts,
    /// DLCA: RTS/CTS handshake, TXOP, final ACK.
    Dlca,
    /// Wide-band ATF announcement; no feedback of any kind.
    ShTxop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    Wait,
    Transmit(ChannelId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSlot {
    pub transmitters: Vec<ApId>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutcome {
    pub channels: Vec<ChannelSlot>,
    pub observations: Vec<Observation>,
    pub feedback: Vec<Feedback>,
}

impl SlotOutcome {
    pub fn successes(&self) -> impl Iterator<Item = (ChannelId, ApId)> + '_ {
        self.channels.iter().enumerate().filter_map(|(f, c)| match c.verdict {
            Verdict::Success(ap) => Some((f, ap)),
            _ => None,
        })
    }
}

/// Resolves one slot. `assignment[ap]` is the primary channel of `ap`;
/// an AP may only transmit there.
pub fn resolve_slot(
    intents: &[Intent],
    assignment: &[ChannelId],
    n_channels: usize,
    mode: AccessMode,
) -> Result<SlotOutcome> {
    if intents.len() != assignment.len() {
        return Err(Error::Config(format!(
            "{} intents for {} APs",
            intents.len(),
            assignment.len()
        )));
    }
    let mut channels: Vec<ChannelSlot> = (0..n_channels)
        .map(|_| ChannelSlot {
            transmitters: Vec::new(),
            verdict: Verdict::Idle,
        })
        .collect();
    for (ap, (&intent, &assigned)) in intents.iter().zip(assignment).enumerate() {
        if assigned >= n_channels {
            return Err(Error::Config(format!("AP {ap} assigned to missing channel {assigned}")));
        }
        if let Intent::Transmit(channel) = intent {
            if channel != assigned {
                return Err(Error::WrongChannel { ap, channel, assigned });
            }
            channels[channel].transmitters.push(ap);
        }
    }
    for slot in &mut channels {
        slot.verdict = match slot.transmitters.as_slice() {
            [] => Verdict::Idle,
            [ap] => Verdict::Success(*ap),
            _ => Verdict::Collision,
        };
    }

    let mut observations = Vec::with_capacity(assignment.len());
    let mut feedback = Vec::with_capacity(assignment.len());
    for (&intent, &assigned) in intents.iter().zip(assignment) {
        let slot = &channels[assigned];
        observations.push(if slot.transmitters.is_empty() {
            Observation::Idle
        } else {
            Observation::Busy
        });
        feedback.push(match (intent, slot.verdict) {
            (Intent::Wait, _) => Feedback::None,
            (Intent::Transmit(_), Verdict::Success(_)) => match mode {
                AccessMode::Basic | AccessMode::Dlca => Feedback::Ack,
                AccessMode::RtsCts => Feedback::Cts,
                AccessMode::ShTxop => Feedback::None,
            },
            (Intent::Transmit(_), _) => match mode {
                AccessMode::ShTxop => Feedback::None,
                _ => Feedback::Timeout,
            },
        });
    }
    Ok(SlotOutcome {
        channels,
        observations,
        feedback,
    })
}
