//! MAC timing parameters and composite slot durations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame timing of the multi-AP network. Durations are in microseconds,
/// frame sizes in bytes (each control frame additionally carries one PHY
/// header).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingParams {
    pub slot_time_us: f64,
    pub sifs_us: f64,
    pub difs_us: f64,
    pub phy_header_us: f64,
    pub txop_us: f64,
    pub cts_timeout_us: f64,
    pub ack_timeout_us: f64,
    /// Data-frame MAC header. It travels inside the TXOP interval.
    pub mac_header_bytes: u32,
    pub ack_bytes: u32,
    pub rts_bytes: u32,
    pub cts_bytes: u32,
    pub atf_bytes: u32,
    /// Rate used for control frames.
    pub basic_rate_bps: f64,
    pub channel_bandwidth_hz: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            slot_time_us: 50.0,
            sifs_us: 28.0,
            difs_us: 128.0,
            phy_header_us: 20.0,
            txop_us: 640.0,
            cts_timeout_us: 300.0,
            ack_timeout_us: 300.0,
            mac_header_bytes: 36,
            ack_bytes: 14,
            rts_bytes: 20,
            cts_bytes: 14,
            atf_bytes: 16,
            basic_rate_bps: 6e6,
            channel_bandwidth_hz: 20e6,
        }
    }
}

/// The kinds of medium interval the simulators advance the clock by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    /// One idle backoff slot.
    Backoff,
    /// RTS collision: RTS, CTS timeout, DIFS.
    RtsCtsExchange,
    /// RTS, CTS, TXOP and ACK separated by SIFS, then DIFS.
    RtsCtsSuccess,
    /// Basic-access success: TXOP, SIFS, ACK, DIFS.
    TxopSlot,
    /// Basic-access collision: the TXOP is lost, then ACK timeout and DIFS.
    BasicCollision,
    /// Fixed-length DLCA contention slot, identical for every outcome.
    DlcaContention,
    /// Announcement trigger frame plus SIFS.
    ShTxopAtf,
    /// ATF, shared TXOP on every sub-channel, ACK, DIFS.
    ShTxopSuccess,
    /// Conflicting ATFs: the whole TXOP is wasted.
    ShTxopCollision,
}

impl TimingParams {
    /// Preset with the 8.16 ms maximum TXOP.
    pub fn long_txop() -> Self {
        Self {
            txop_us: 8160.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let durations = [
            ("slot_time_us", self.slot_time_us),
            ("sifs_us", self.sifs_us),
            ("difs_us", self.difs_us),
            ("phy_header_us", self.phy_header_us),
            ("txop_us", self.txop_us),
            ("cts_timeout_us", self.cts_timeout_us),
            ("ack_timeout_us", self.ack_timeout_us),
            ("basic_rate_bps", self.basic_rate_bps),
            ("channel_bandwidth_hz", self.channel_bandwidth_hz),
        ];
        for (name, v) in durations {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sifs_us >= self.difs_us {
            return Err(Error::Config(format!(
                "SIFS ({}) must be shorter than DIFS ({})",
                self.sifs_us, self.difs_us
            )));
        }
        let handshake = self.rts_us() + self.sifs_us + self.cts_us() + self.sifs_us;
        if self.txop_us <= handshake {
            return Err(Error::Config(format!(
                "TXOP ({} us) must exceed the RTS/CTS exchange ({handshake} us)",
                self.txop_us
            )));
        }
        Ok(())
    }

    /// Airtime of a control frame of `bytes` at the basic rate, PHY header included.
    pub fn control_frame_us(&self, bytes: u32) -> f64 {
        f64::from(bytes) * 8.0 / self.basic_rate_bps * 1e6 + self.phy_header_us
    }

    pub fn rts_us(&self) -> f64 {
        self.control_frame_us(self.rts_bytes)
    }

    pub fn cts_us(&self) -> f64 {
        self.control_frame_us(self.cts_bytes)
    }

    pub fn ack_us(&self) -> f64 {
        self.control_frame_us(self.ack_bytes)
    }

    pub fn atf_us(&self) -> f64 {
        self.control_frame_us(self.atf_bytes)
    }

    /// Wall-clock length of one medium interval of `kind`, in microseconds.
    pub fn advance_clock(&self, kind: SlotKind) -> f64 {
        let (sifs, difs, txop) = (self.sifs_us, self.difs_us, self.txop_us);
        match kind {
            SlotKind::Backoff => self.slot_time_us,
            SlotKind::RtsCtsExchange => self.rts_us() + self.cts_timeout_us + difs,
            SlotKind::RtsCtsSuccess => {
                self.rts_us() + sifs + self.cts_us() + sifs + txop + sifs + self.ack_us() + difs
            }
            SlotKind::TxopSlot => txop + sifs + self.ack_us() + difs,
            SlotKind::BasicCollision => txop + self.ack_timeout_us + difs,
            SlotKind::DlcaContention => {
                self.rts_us() + sifs + self.cts_us() + sifs + txop + sifs + self.ack_us()
            }
            SlotKind::ShTxopAtf => self.atf_us() + sifs,
            SlotKind::ShTxopSuccess => self.atf_us() + sifs + txop + sifs + self.ack_us() + difs,
            SlotKind::ShTxopCollision => self.atf_us() + sifs + txop + difs,
        }
    }

    /// Same as [`advance_clock`](Self::advance_clock), in seconds.
    pub fn seconds(&self, kind: SlotKind) -> f64 {
        self.advance_clock(kind) * 1e-6
    }
}
