//! Per-(AP, channel) spectral efficiency.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{ApId, ChannelId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// Drawn once per trial and held for the whole run.
    #[default]
    BlockConstant,
    /// Redrawn whenever the controller starts a new allocation epoch.
    RedrawAtEpoch,
}

/// Spectral efficiency in bit/s/Hz, row per AP, column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    n_aps: usize,
    n_channels: usize,
    efficiency: Vec<f64>,
    pub fading_mode: FadingMode,
    pub range: (f64, f64),
}

impl ChannelModel {
    pub const DEFAULT_RANGE: (f64, f64) = (1.0, 3.0);

    pub fn draw<R: Rng>(n_aps: usize, n_channels: usize, fading_mode: FadingMode, rng: &mut R) -> Self {
        Self::draw_in(n_aps, n_channels, fading_mode, Self::DEFAULT_RANGE, rng)
    }

    /// Draws every entry independently from U[range.0, range.1).
    pub fn draw_in<R: Rng>(
        n_aps: usize,
        n_channels: usize,
        fading_mode: FadingMode,
        range: (f64, f64),
        rng: &mut R,
    ) -> Self {
        let efficiency = (0..n_aps * n_channels)
            .map(|_| rng.random_range(range.0..range.1))
            .collect();
        Self {
            n_aps,
            n_channels,
            efficiency,
            fading_mode,
            range,
        }
    }

    /// Builds a model from explicit rows (one per AP).
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_channels = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_channels), "ragged efficiency matrix");
        let (lo, hi) = rows
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Self {
            n_aps: rows.len(),
            n_channels,
            efficiency: rows.iter().flatten().copied().collect(),
            fading_mode: FadingMode::BlockConstant,
            range: (lo, hi),
        }
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn get(&self, ap: ApId, channel: ChannelId) -> f64 {
        self.efficiency[ap * self.n_channels + channel]
    }

    pub fn row(&self, ap: ApId) -> &[f64] {
        &self.efficiency[ap * self.n_channels..(ap + 1) * self.n_channels]
    }

    /// Exchanges the efficiency rows of two APs.
    pub fn swap_aps(&mut self, a: ApId, b: ApId) {
        if a == b {
            return;
        }
        for f in 0..self.n_channels {
            self.efficiency.swap(a * self.n_channels + f, b * self.n_channels + f);
        }
    }

    /// Applies the fading mode at an epoch boundary.
    pub fn on_epoch<R: Rng>(&mut self, rng: &mut R) {
        if self.fading_mode == FadingMode::RedrawAtEpoch {
            let (lo, hi) = self.range;
            for v in &mut self.efficiency {
                *v = rng.random_range(lo..hi);
            }
        }
    }

    /// Payload credited to `ap` for one TXOP on `channel`.
    pub fn deliver_bits(&self, ap: ApId, channel: ChannelId, bandwidth_hz: f64, txop_us: f64) -> f64 {
        deliver_bits(self.get(ap, channel), bandwidth_hz, txop_us)
    }
}

/// Bits carried by a TXOP of `txop_us` at `efficiency` bit/s/Hz over `bandwidth_hz`.
pub fn deliver_bits(efficiency: f64, bandwidth_hz: f64, txop_us: f64) -> f64 {
    efficiency * bandwidth_hz * txop_us * 1e-6
}
