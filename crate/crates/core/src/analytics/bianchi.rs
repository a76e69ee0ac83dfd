//! Saturated-DCF contention fixed point and the analytical throughput it
//! feeds.

use crate::analytics::{overhead_basic, overhead_rts, per_ap_rate};
use crate::error::{Error, Result};
use crate::timing::{SlotKind, TimingParams};

/// Initial windows searched by [`optimize_window`]: 2^1 ..= 2^12.
pub const WINDOW_GRID: [u32; 12] = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096];

const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

/// What a collision costs on the medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionCost {
    /// Only the RTS and the CTS timeout are lost.
    Rts,
    /// The whole TXOP is lost.
    Basic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentionSolution {
    pub n: usize,
    /// Per-slot transmission probability of one station.
    pub tau: f64,
    /// Probability that a transmission collides.
    pub p: f64,
    pub iterations: usize,
    /// `|tau - g(tau)|` at the returned point.
    pub residual: f64,
}

fn collision_prob(tau: f64, n: usize) -> f64 {
    1.0 - (1.0 - tau).powi(n as i32 - 1)
}

/// `tau = 2 / (1 + W + p W sum_{k<m} (2p)^k)`, the backoff chain's
/// stationary attempt rate written without the removable singularity at
/// `p = 1/2`.
fn attempt_rate(p: f64, w: f64, m: u32) -> f64 {
    let mut geo = 0.0;
    let mut term = 1.0;
    for _ in 0..m {
        geo += term;
        term *= 2.0 * p;
    }
    2.0 / (1.0 + w + p * w * geo)
}

/// Solves the coupled attempt/collision equations for `n` saturated
/// stations with initial window `w` and `m` doublings.
pub fn bianchi_fixed_point(n: usize, w: u32, m: u32) -> Result<ContentionSolution> {
    if n == 0 || w == 0 {
        return Err(Error::Config(format!("fixed point needs n >= 1 and W >= 1, got n={n}, W={w}")));
    }
    let wf = w as f64;
    let g = |tau: f64| attempt_rate(collision_prob(tau, n), wf, m);
    let mut tau = 2.0 / (wf + 1.0);
    let mut damping = 0.5;
    let mut prev_step = 0.0f64;
    let mut step = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        step = damping * (g(tau) - tau);
        // g is decreasing in tau; a sign flip means the damped map
        // overshoots, so shrink the step.
        if step * prev_step < 0.0 {
            damping = (damping * 0.5).max(1e-3);
        }
        tau = (tau + step).clamp(0.0, 1.0);
        prev_step = step;
        if step.abs() < TOLERANCE {
            return Ok(ContentionSolution {
                n,
                tau,
                p: collision_prob(tau, n),
                iterations: it,
                residual: (tau - g(tau)).abs(),
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        last_step: step.abs(),
    })
}

impl ContentionSolution {
    /// Probability that a given station transmits alone in a slot.
    pub fn success_prob(&self) -> f64 {
        self.tau * (1.0 - self.tau).powi(self.n as i32 - 1)
    }

    /// Probability that at least one station transmits.
    pub fn busy_prob(&self) -> f64 {
        1.0 - (1.0 - self.tau).powi(self.n as i32)
    }

    /// Expected length of a generic slot.
    pub fn mean_slot(&self, idle: f64, success: f64, collision: f64) -> f64 {
        let p_tr = self.busy_prob();
        let p_s = self.n as f64 * self.success_prob();
        (1.0 - p_tr) * idle + p_s * success + (p_tr - p_s) * collision
    }

    /// Fraction of airtime a station spends in its own successful
    /// packet cycles.
    pub fn airtime_share(&self, idle: f64, success: f64, collision: f64) -> f64 {
        self.success_prob() * success / self.mean_slot(idle, success, collision)
    }
}

fn cycle_durations(timing: &TimingParams, cost: CollisionCost) -> (f64, f64, f64, f64) {
    let idle = timing.seconds(SlotKind::Backoff);
    let txop = timing.txop_us * 1e-6;
    match cost {
        CollisionCost::Rts => {
            let d0 = overhead_rts(timing);
            (idle, txop + d0, timing.seconds(SlotKind::RtsCtsExchange), d0)
        }
        CollisionCost::Basic => {
            let d0 = overhead_basic(timing);
            (idle, txop + d0, timing.seconds(SlotKind::BasicCollision), d0)
        }
    }
}

/// Aggregate analytical throughput (bits/s) of one channel shared by APs
/// with the given spectral efficiencies.
pub fn analytic_channel_throughput(
    efficiencies: &[f64],
    w: u32,
    m: u32,
    timing: &TimingParams,
    cost: CollisionCost,
) -> Result<f64> {
    if efficiencies.is_empty() {
        return Ok(0.0);
    }
    let sol = bianchi_fixed_point(efficiencies.len(), w, m)?;
    let (idle, success, collision, delta0) = cycle_durations(timing, cost);
    let z = sol.airtime_share(idle, success, collision);
    let txop = timing.txop_us * 1e-6;
    Ok(efficiencies
        .iter()
        .map(|&c| {
            let rate = c * timing.channel_bandwidth_hz;
            per_ap_rate(z, rate * txop, rate, delta0)
        })
        .sum())
}

/// Initial window from [`WINDOW_GRID`] maximising the analytical
/// throughput of `n` contenders; ties go to the smaller window.
pub fn optimize_window(n: usize, timing: &TimingParams, m: u32, cost: CollisionCost) -> Result<u32> {
    let mut best = (WINDOW_GRID[0], f64::NEG_INFINITY);
    let unit = vec![1.0; n];
    for &w in &WINDOW_GRID {
        let x = analytic_channel_throughput(&unit, w, m, timing, cost)?;
        if x > best.1 {
            best = (w, x);
        }
    }
    Ok(best.0)
}
