//! Closed-form throughput model and run-time metrics.

mod bianchi;
mod metrics;

pub use bianchi::{
    analytic_channel_throughput, bianchi_fixed_point, optimize_window, CollisionCost, ContentionSolution,
    WINDOW_GRID,
};
pub use metrics::{pf_convergence, pf_spread, MetricsTrace, PfConvergence, Recorder, SlotCounts, TickRecord};

use crate::error::{Error, Result};
use crate::timing::TimingParams;

/// Airtime inputs of the per-packet overhead `delta0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOverheads {
    pub rts_bits: f64,
    pub cts_bits: f64,
    pub ack_bits: f64,
    pub basic_rate_bps: f64,
    /// PHY preamble added to every control frame, seconds.
    pub control_phy_s: f64,
    /// MAC header airtime outside the TXOP, seconds.
    pub header_s: f64,
    pub difs_s: f64,
    pub sifs_s: f64,
}

impl FrameOverheads {
    /// Overheads implied by `timing`. The MAC header is carried inside the
    /// TXOP, so it adds no separate airtime.
    pub fn from_timing(t: &TimingParams) -> Self {
        Self {
            rts_bits: 8.0 * t.rts_bytes as f64,
            cts_bits: 8.0 * t.cts_bytes as f64,
            ack_bits: 8.0 * t.ack_bytes as f64,
            basic_rate_bps: t.basic_rate_bps,
            control_phy_s: t.phy_header_us * 1e-6,
            header_s: 0.0,
            difs_s: t.difs_us * 1e-6,
            sifs_s: t.sifs_us * 1e-6,
        }
    }

    /// RTS, CTS and ACK at the basic rate, plus header, DIFS and 3 SIFS.
    pub fn delta0_rts(&self) -> f64 {
        (self.rts_bits + self.cts_bits + self.ack_bits) / self.basic_rate_bps
            + 3.0 * self.control_phy_s
            + self.header_s
            + self.difs_s
            + 3.0 * self.sifs_s
    }

    /// ACK at the basic rate, plus header, DIFS and one SIFS.
    pub fn delta0_basic(&self) -> f64 {
        self.ack_bits / self.basic_rate_bps + self.control_phy_s + self.header_s + self.difs_s + self.sifs_s
    }
}

/// Per-packet protocol overhead of RTS/CTS access, seconds.
pub fn overhead_rts(timing: &TimingParams) -> f64 {
    FrameOverheads::from_timing(timing).delta0_rts()
}

/// Per-packet protocol overhead of basic access, seconds.
pub fn overhead_basic(timing: &TimingParams) -> f64 {
    FrameOverheads::from_timing(timing).delta0_basic()
}

/// Everything needed to turn a success fraction into a bit rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadModel {
    pub delta0_rts: f64,
    pub delta0_basic: f64,
    pub packet_bits: f64,
    pub channel_rate: f64,
    pub basic_rate: f64,
}

impl OverheadModel {
    pub fn new(timing: &TimingParams, spectral_efficiency: f64) -> Self {
        let channel_rate = spectral_efficiency * timing.channel_bandwidth_hz;
        Self {
            delta0_rts: overhead_rts(timing),
            delta0_basic: overhead_basic(timing),
            packet_bits: channel_rate * timing.txop_us * 1e-6,
            channel_rate,
            basic_rate: timing.basic_rate_bps,
        }
    }
}

/// `x = z L U / (L + delta0 U)`: information rate of an AP that holds a
/// fraction `z` of the airtime in successful packet cycles.
pub fn per_ap_rate(z: f64, packet_bits: f64, channel_rate: f64, delta0: f64) -> f64 {
    z * packet_bits * channel_rate / (packet_bits + delta0 * channel_rate)
}

/// `sum_n ln D_n`; undefined when any AP is starved.
pub fn compute_utility(avg_rates: &[f64]) -> Result<f64> {
    let mut u = 0.0;
    for (ap, &d) in avg_rates.iter().enumerate() {
        if !(d > 0.0) {
            return Err(Error::UndefinedUtility { ap, rate: d });
        }
        u += d.ln();
    }
    Ok(u)
}

/// `b = D / phi`.
pub fn pf_ratio(avg_rate: f64, achievable: f64) -> Result<f64> {
    if !(achievable > 0.0) {
        return Err(Error::ZeroAchievableRate(achievable));
    }
    Ok(avg_rate / achievable)
}
