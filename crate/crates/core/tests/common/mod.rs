//! Reference computations the integration tests compare the library
//! against. Each one is written independently of the code under test.
#![allow(dead_code)]

use dlca_core::agent::Action;
use dlca_core::medium::{Feedback, Observation};
use dlca_core::qnn::{GradientSet, QnnParams, STATE_WIDTH};
use num_bigint::BigInt;
use rand::Rng;

/// Direct weighted sum `sum_l eta^l * y_{t-l}` over the window (newest
/// last), or the sensing reward of a wait.
pub fn reward_direct(action: Action, window: &[Feedback], next: Observation, eta: f64) -> f64 {
    match action {
        Action::Wait => {
            if next == Observation::Busy {
                1.0
            } else {
                -1.0
            }
        }
        Action::Contend => {
            let mut total = 0.0;
            for (lag, f) in window.iter().rev().enumerate() {
                let y = match f {
                    Feedback::Ack | Feedback::Cts => 1.0,
                    Feedback::Timeout => -1.0,
                    Feedback::None => 0.0,
                };
                total += eta.powi(lag as i32) * y;
            }
            total
        }
    }
}

/// A history window of `len` steps, each a wait or a transmission with a
/// random outcome, ending with a transmission.
pub fn random_window<R: Rng>(rng: &mut R, len: usize) -> Vec<Feedback> {
    let mut w: Vec<Feedback> = (0..len)
        .map(|_| match rng.random_range(0..4) {
            0 => Feedback::None,
            1 => Feedback::Ack,
            2 => Feedback::Cts,
            _ => Feedback::Timeout,
        })
        .collect();
    if let Some(last) = w.last_mut() {
        if *last == Feedback::None {
            *last = if rng.random() { Feedback::Ack } else { Feedback::Timeout };
        }
    }
    w
}

/// Plain triple-loop forward pass. Returns the outputs and the smallest
/// hidden pre-activation magnitude (distance to the nearest ReLU kink).
pub fn naive_forward(p: &QnnParams, input: &[f64]) -> (Vec<f64>, f64) {
    let mut x = input.to_vec();
    let mut closest = f64::INFINITY;
    let last = p.layers().len() - 1;
    for (l, layer) in p.layers().iter().enumerate() {
        let mut y = layer.bias().to_vec();
        for (o, yo) in y.iter_mut().enumerate() {
            for (i, xi) in x.iter().enumerate() {
                *yo += xi * layer.weight(i, o);
            }
        }
        if l < last {
            for v in y.iter_mut() {
                closest = closest.min(v.abs());
                *v = v.max(0.0);
            }
        }
        x = y;
    }
    (x, closest)
}

/// `x = m * 2^e` exactly.
fn dyadic(x: f64) -> (BigInt, i32) {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    (BigInt::from(sign) * BigInt::from(mant), e)
}

fn scaled(m: &BigInt, e: i32, base: i32) -> BigInt {
    m.clone() << ((e - base) as usize)
}

/// Distance between adjacent doubles at `x`.
pub fn ulp(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(a.to_bits() + 1) - a
    }
}

/// Whether `avg` lies within one ulp of the exact arithmetic mean of
/// `values`, decided in exact integer arithmetic.
pub fn within_one_ulp_of_mean(values: &[f64], avg: f64) -> bool {
    let n = values.len() as i64;
    let u = ulp(avg);
    let parts: Vec<(BigInt, i32)> = values.iter().map(|&v| dyadic(v)).collect();
    let (ma, ea) = dyadic(avg);
    let (mu, eu) = dyadic(u);
    let base = parts.iter().map(|p| p.1).chain([ea, eu]).min().unwrap();
    let sum: BigInt = parts.iter().map(|(m, e)| scaled(m, *e, base)).sum();
    let lhs = scaled(&ma, ea, base) * n - sum;
    let bound = scaled(&mu, eu, base) * n;
    lhs.magnitude() <= bound.magnitude()
}

/// `sum_n ln(C[n][f_n] * bw / count[f_n])` of a static assignment, the
/// long-run utility when co-channel APs time-share equally.
pub fn static_utility(c: &[Vec<f64>], plan: &[usize], bandwidth: f64) -> f64 {
    let f = c[0].len();
    let mut count = vec![0usize; f];
    for &ch in plan {
        count[ch] += 1;
    }
    plan.iter()
        .enumerate()
        .map(|(ap, &ch)| (c[ap][ch] * bandwidth / count[ch] as f64).ln())
        .sum()
}

/// Best [`static_utility`] over all `F^N` assignments.
pub fn best_static_utility(c: &[Vec<f64>], bandwidth: f64) -> f64 {
    let (n, f) = (c.len(), c[0].len());
    let total = f.pow(n as u32);
    let mut plan = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    for code in 0..total {
        let mut k = code;
        for slot in plan.iter_mut() {
            *slot = k % f;
            k /= f;
        }
        best = best.max(static_utility(c, &plan, bandwidth));
    }
    best
}

/// Slot-by-slot simulation of `n` saturated stations running binary
/// exponential backoff: counters drawn from `[0, W_i - 1]`, decremented
/// every slot, transmit at zero; stage grows after a collision (up to `m`)
/// and resets after a success. Returns the measured per-slot attempt rate
/// and the collision probability seen by a transmission.
pub fn simulate_backoff<R: Rng>(n: usize, w: u32, m: u32, slots: u64, rng: &mut R) -> (f64, f64) {
    let mut stage = vec![0u32; n];
    let mut counter: Vec<u32> = (0..n).map(|_| rng.random_range(0..w)).collect();
    let (mut attempts, mut collided) = (0u64, 0u64);
    let mut tx = Vec::with_capacity(n);
    for _ in 0..slots {
        tx.clear();
        tx.extend((0..n).filter(|&i| counter[i] == 0));
        attempts += tx.len() as u64;
        if tx.len() > 1 {
            collided += tx.len() as u64;
        }
        for c in counter.iter_mut() {
            *c = c.saturating_sub(1);
        }
        for &i in &tx {
            stage[i] = if tx.len() > 1 { (stage[i] + 1).min(m) } else { 0 };
            counter[i] = rng.random_range(0..w << stage[i]);
        }
    }
    (
        attempts as f64 / (n as u64 * slots) as f64,
        collided as f64 / attempts.max(1) as f64,
    )
}

/// A cheap variant of a preset: its first scenario point of every
/// protocol, two trials, a short run.
pub fn quick(mut exp: dlca_core::scenario::Experiment) -> dlca_core::scenario::Experiment {
    exp.n_values.truncate(1);
    exp.f_values.truncate(1);
    exp.base.trials = 2;
    exp.base.run = dlca_core::scenario::RunLength::Slots(600);
    exp
}

/// `(summary, trace)` CSV text of an experiment run with `workers` threads.
pub fn csv_of(exp: &dlca_core::scenario::Experiment, workers: Option<usize>) -> (String, String) {
    use dlca_core::scenario::{run_experiment_with, summary_csv, trace_csv};
    let reports = run_experiment_with(exp, workers).expect("experiment runs");
    (summary_csv(exp, &reports), trace_csv(exp, &reports))
}

/// Finite-difference step.
pub const H: f64 = 1e-5;

/// A plausible agent input: history bits then a contender fraction.
pub fn random_state<R: Rng>(rng: &mut R) -> Vec<f64> {
    let mut s: Vec<f64> = (0..STATE_WIDTH - 1).map(|_| rng.random_range(0..2) as f64).collect();
    let n = rng.random_range(8..=56);
    s.push(rng.random_range(1..=n) as f64 / n as f64);
    s
}

/// A state whose hidden pre-activations all keep clear of zero, so that a
/// step of `H` in any parameter cannot cross a ReLU kink.
pub fn smooth_state<R: Rng>(p: &QnnParams, rng: &mut R) -> Vec<f64> {
    loop {
        let s = random_state(rng);
        if naive_forward(p, &s).1 >= 1e-3 {
            return s;
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Param {
    pub layer: usize,
    pub bias: bool,
    pub k: usize,
}

pub fn sample_params<R: Rng>(p: &QnnParams, per_layer: usize, rng: &mut R) -> Vec<Param> {
    let mut out = Vec::new();
    for (layer, d) in p.layers().iter().enumerate() {
        for j in 0..per_layer {
            let bias = j % 5 == 0;
            let len = if bias { d.bias().len() } else { d.weights().len() };
            out.push(Param {
                layer,
                bias,
                k: rng.random_range(0..len),
            });
        }
    }
    out
}

pub fn nudge(p: &mut QnnParams, at: Param, delta: f64) {
    let d = &mut p.layers_mut()[at.layer];
    let slot = if at.bias { &mut d.bias_mut()[at.k] } else { &mut d.weights_mut()[at.k] };
    *slot += delta;
}

pub fn read(g: &GradientSet, at: Param) -> f64 {
    let d = &g.layers()[at.layer];
    if at.bias {
        d.bias()[at.k]
    } else {
        d.weights()[at.k]
    }
}

pub fn read_params(p: &QnnParams, at: Param) -> f64 {
    let d = &p.layers()[at.layer];
    if at.bias {
        d.bias()[at.k]
    } else {
        d.weights()[at.k]
    }
}

/// Central difference of `f` in one parameter.
pub fn central(p: &QnnParams, at: Param, f: impl Fn(&QnnParams) -> f64) -> f64 {
    let mut plus = p.clone();
    nudge(&mut plus, at, H);
    let mut minus = p.clone();
    nudge(&mut minus, at, -H);
    (f(&plus) - f(&minus)) / (2.0 * H)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

