//! Time-binned run metrics.

use serde::Serialize;

use crate::analytics::compute_utility;
use crate::ApId;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotCounts {
    pub successes: u64,
    pub collisions: u64,
    pub idle: u64,
}

/// One trace bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickRecord {
    pub index: usize,
    pub end_time_s: f64,
    pub throughput_bps: f64,
    pub successes: u64,
    pub collisions: u64,
    pub idle: u64,
    /// Per-AP `D / phi`, with `D` averaged over the trailing PF window.
    /// Empty when no achievable rates were supplied.
    pub pf_ratio: Vec<f64>,
}

/// Summary of one run over its measurement window, plus the full trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTrace {
    pub throughput_bps: f64,
    pub per_ap_throughput_bps: Vec<f64>,
    pub success_slots: u64,
    pub collision_slots: u64,
    pub idle_slots: u64,
    /// Collision slots per successful TXOP; NaN without successes.
    pub collisions_per_txop: f64,
    /// Idle slots per successful TXOP; NaN without successes.
    pub idle_per_txop: f64,
    /// `sum ln D`; `None` when some AP was starved.
    pub utility: Option<f64>,
    pub tick_s: f64,
    pub ticks: Vec<TickRecord>,
}

/// Accumulates events stamped with simulated time.
///
/// Events at or after `window_start_s` also count towards the summary.
#[derive(Debug, Clone)]
pub struct Recorder {
    n_aps: usize,
    tick_s: f64,
    duration_s: f64,
    window_start_s: f64,
    pf_window_ticks: usize,
    tick_bits: Vec<f64>,
    tick_counts: Vec<SlotCounts>,
    phi: Vec<Option<Vec<f64>>>,
    window_bits: Vec<f64>,
    window: SlotCounts,
}

impl Recorder {
    pub fn new(n_aps: usize, duration_s: f64, tick_s: f64, window_start_s: f64, pf_window_ticks: usize) -> Self {
        assert!(tick_s > 0.0 && duration_s > 0.0);
        let n_ticks = ((duration_s / tick_s) - 1e-9).ceil().max(1.0) as usize;
        Self {
            n_aps,
            tick_s,
            duration_s,
            window_start_s,
            pf_window_ticks: pf_window_ticks.max(1),
            tick_bits: vec![0.0; n_ticks * n_aps],
            tick_counts: vec![SlotCounts::default(); n_ticks],
            phi: vec![None; n_ticks],
            window_bits: vec![0.0; n_aps],
            window: SlotCounts::default(),
        }
    }

    pub fn n_ticks(&self) -> usize {
        self.tick_counts.len()
    }

    pub fn tick_of(&self, t: f64) -> usize {
        ((t / self.tick_s) as usize).min(self.n_ticks() - 1)
    }

    fn in_window(&self, t: f64) -> bool {
        t >= self.window_start_s
    }

    pub fn success(&mut self, t: f64, ap: ApId, bits: f64) {
        let k = self.tick_of(t);
        self.tick_bits[k * self.n_aps + ap] += bits;
        self.tick_counts[k].successes += 1;
        if self.in_window(t) {
            self.window_bits[ap] += bits;
            self.window.successes += 1;
        }
    }

    pub fn collision(&mut self, t: f64, count: u64) {
        let k = self.tick_of(t);
        self.tick_counts[k].collisions += count;
        if self.in_window(t) {
            self.window.collisions += count;
        }
    }

    pub fn idle(&mut self, t: f64, count: u64) {
        let k = self.tick_of(t);
        self.tick_counts[k].idle += count;
        if self.in_window(t) {
            self.window.idle += count;
        }
    }

    /// Achievable rates in force from the tick containing `t` onwards.
    pub fn set_phi(&mut self, t: f64, phi: Vec<f64>) {
        let k = self.tick_of(t);
        self.phi[k] = Some(phi);
    }

    pub fn finish(self) -> MetricsTrace {
        let n = self.n_aps;
        let n_ticks = self.n_ticks();
        let tick_len = |k: usize| (self.duration_s - k as f64 * self.tick_s).min(self.tick_s);
        let mut ticks = Vec::with_capacity(n_ticks);
        let mut phi: Option<&Vec<f64>> = None;
        for k in 0..n_ticks {
            if let Some(p) = &self.phi[k] {
                phi = Some(p);
            }
            let bits = &self.tick_bits[k * n..(k + 1) * n];
            let first = (k + 1).saturating_sub(self.pf_window_ticks);
            let span: f64 = (first..=k).map(tick_len).sum();
            let pf_ratio = match phi {
                Some(p) => (0..n)
                    .map(|ap| {
                        let d: f64 = (first..=k).map(|j| self.tick_bits[j * n + ap]).sum::<f64>() / span;
                        d / p[ap]
                    })
                    .collect(),
                None => Vec::new(),
            };
            let c = self.tick_counts[k];
            ticks.push(TickRecord {
                index: k,
                end_time_s: k as f64 * self.tick_s + tick_len(k),
                throughput_bps: bits.iter().sum::<f64>() / tick_len(k),
                successes: c.successes,
                collisions: c.collisions,
                idle: c.idle,
                pf_ratio,
            });
        }
        let window_len = self.duration_s - self.window_start_s;
        let per_ap: Vec<f64> = self.window_bits.iter().map(|b| b / window_len).collect();
        let per_txop = |x: u64| {
            if self.window.successes == 0 {
                f64::NAN
            } else {
                x as f64 / self.window.successes as f64
            }
        };
        MetricsTrace {
            throughput_bps: per_ap.iter().sum(),
            utility: compute_utility(&per_ap).ok(),
            per_ap_throughput_bps: per_ap,
            success_slots: self.window.successes,
            collision_slots: self.window.collisions,
            idle_slots: self.window.idle,
            collisions_per_txop: per_txop(self.window.collisions),
            idle_per_txop: per_txop(self.window.idle),
            tick_s: self.tick_s,
            ticks,
        }
    }
}

/// When the PF-ratio spread first settles below a bound, and when it
/// settles again after a perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PfConvergence {
    /// First tick from which `max b / min b <= bound` holds up to the
    /// perturbation (or the end of the run).
    pub converged_tick: Option<usize>,
    /// First tick at or after the perturbation from which the bound holds
    /// to the end of the run.
    pub recovered_tick: Option<usize>,
}

impl PfConvergence {
    /// Convergence time measured from the start of the run, in ticks.
    pub fn convergence_ticks(&self) -> Option<usize> {
        self.converged_tick.map(|k| k + 1)
    }

    /// Recovery time measured from the perturbation tick, in ticks.
    pub fn recovery_ticks(&self, perturbation_tick: usize) -> Option<usize> {
        self.recovered_tick.map(|k| k + 1 - perturbation_tick)
    }
}

/// Spread `max b / min b` of one tick; infinite if some ratio is not
/// positive.
pub fn pf_spread(ratios: &[f64]) -> f64 {
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

pub fn pf_convergence(ticks: &[TickRecord], perturbation_tick: Option<usize>, bound: f64) -> PfConvergence {
    let ok: Vec<bool> = ticks.iter().map(|t| pf_spread(&t.pf_ratio) <= bound).collect();
    let settle = |from: usize, to: usize| -> Option<usize> {
        if from >= to || !ok[to - 1] {
            return None;
        }
        let mut k = to - 1;
        while k > from && ok[k - 1] {
            k -= 1;
        }
        Some(k)
    };
    let end_pre = perturbation_tick.unwrap_or(ticks.len()).min(ticks.len());
    PfConvergence {
        converged_tick: settle(0, end_pre),
        recovered_tick: perturbation_tick.and_then(|p| settle(p, ticks.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accounting_and_window() {
        let mut r = Recorder::new(2, 1.0, 0.25, 0.5, 2);
        r.set_phi(0.0, vec![100.0, 50.0]);
        r.success(0.1, 0, 10.0);
        r.success(0.6, 1, 20.0);
        r.collision(0.7, 1);
        r.idle(0.8, 3);
        r.idle(0.2, 5);
        let m = r.finish();
        assert_eq!(m.ticks.len(), 4);
        assert_eq!(m.success_slots, 1);
        assert_eq!(m.collision_slots, 1);
        assert_eq!(m.idle_slots, 3);
        assert_eq!(m.idle_per_txop, 3.0);
        assert_eq!(m.per_ap_throughput_bps, vec![0.0, 40.0]);
        assert_eq!(m.utility, None);
        assert_eq!(m.ticks[0].throughput_bps, 40.0);
        assert_eq!(m.ticks[0].idle, 5);
        // Tick 2 averages ticks 1-2 over 0.5 s.
        assert_eq!(m.ticks[2].pf_ratio, vec![0.0, 40.0 / 50.0]);
        let total: u64 = m.ticks.iter().map(|t| t.successes + t.collisions + t.idle).sum();
        assert_eq!(total, 2 + 1 + 8);
    }

    fn tick(ratios: Vec<f64>) -> TickRecord {
        TickRecord {
            index: 0,
            end_time_s: 0.0,
            throughput_bps: 0.0,
            successes: 0,
            collisions: 0,
            idle: 0,
            pf_ratio: ratios,
        }
    }

    #[test]
    fn convergence_detection() {
        let good = || tick(vec![1.0, 1.1]);
        let bad = || tick(vec![1.0, 2.0]);
        let ticks = vec![bad(), good(), bad(), good(), good(), good(), bad(), good(), good(), good()];
        let c = pf_convergence(&ticks, Some(6), 1.2);
        assert_eq!(c.converged_tick, Some(3));
        assert_eq!(c.convergence_ticks(), Some(4));
        assert_eq!(c.recovered_tick, Some(7));
        assert_eq!(c.recovery_ticks(6), Some(2));
        let never = pf_convergence(&[bad(), bad()], None, 1.2);
        assert_eq!(never.converged_tick, None);
        assert_eq!(pf_spread(&[0.0, 1.0]), f64::INFINITY);
    }
}
