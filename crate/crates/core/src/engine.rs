//! Protocol drivers: one function per access scheme, each simulating a
//! single trial and returning its metrics.

use crate::agent::{Action, DlcaAgent, TrainSchedule};
use crate::analytics::{optimize_window, CollisionCost, MetricsTrace, Recorder};
use crate::apc::{broadcast_contender_counts, fomaml_round, greedy_pf_allocate, AllocationPlan, FairnessLedger};
use crate::channel::{ChannelModel, FadingMode};
use crate::error::Result;
use crate::medium::Verdict;
use crate::protocols::{dlca_step, shtxop_round, AccessProtocol, BackoffState, RoundOutcome, SlotView};
use crate::qnn::QnnParams;
use crate::rng::{Purpose, RngStream};
use crate::scenario::{Protocol, ScenarioConfig};
use crate::timing::SlotKind;
use crate::ApId;

/// Spectral efficiencies as a piecewise-constant function of time.
#[derive(Debug, Clone)]
pub struct ChannelTimeline {
    segments: Vec<(f64, ChannelModel)>,
}

impl ChannelTimeline {
    /// Draws the initial matrix and applies epoch redraws (every
    /// `epoch_s`) and the configured row swap.
    pub fn build(cfg: &ScenarioConfig, epoch_s: f64, stream: &RngStream) -> Self {
        let mut rng = stream.rng(Purpose::Channel, None);
        let mut current = ChannelModel::draw_in(cfg.n_aps, cfg.n_channels, cfg.fading, cfg.efficiency_range, &mut rng);
        let duration = cfg.duration_s();
        let mut events: Vec<(f64, bool)> = Vec::new();
        if cfg.fading == FadingMode::RedrawAtEpoch {
            let mut k = 1u64;
            while (k as f64) * epoch_s < duration {
                events.push((k as f64 * epoch_s, false));
                k += 1;
            }
        }
        if let Some(p) = cfg.perturbation {
            events.push((p.at_fraction * duration, true));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut segments = vec![(0.0, current.clone())];
        for (t, swap) in events {
            if swap {
                let p = cfg.perturbation.expect("swap event implies a perturbation");
                current.swap_aps(p.ap_a, p.ap_b);
            } else {
                current.on_epoch(&mut rng);
            }
            segments.push((t, current.clone()));
        }
        Self { segments }
    }

    pub fn segments(&self) -> &[(f64, ChannelModel)] {
        &self.segments
    }

    pub fn segment_index(&self, t: f64) -> usize {
        self.segments.partition_point(|s| s.0 <= t).saturating_sub(1)
    }

    pub fn at(&self, t: f64) -> &ChannelModel {
        &self.segments[self.segment_index(t)].1
    }
}

fn recorder(cfg: &ScenarioConfig) -> Recorder {
    Recorder::new(
        cfg.n_aps,
        cfg.duration_s(),
        cfg.tick_s(),
        cfg.measure_start_s(),
        cfg.pf_window_ticks,
    )
}

/// Simulates trial `trial` of `cfg`.
pub fn run_trial(cfg: &ScenarioConfig, trial: u64) -> Result<MetricsTrace> {
    cfg.validate()?;
    let stream = RngStream::new(cfg.seed).trial(trial);
    match cfg.protocol {
        Protocol::DcfBasic | Protocol::RtsCts | Protocol::RtsCtsOptimized => run_dcf(cfg, &stream),
        Protocol::ShTxop => run_shtxop(cfg, &stream),
        Protocol::Dlca | Protocol::DlcaGreedy | Protocol::DlcaGreedyFomaml => run_dlca(cfg, &stream),
    }
}

/// DCF on a fixed block allocation. Channels do not interact, so each is
/// simulated on its own clock.
fn run_dcf(cfg: &ScenarioConfig, stream: &RngStream) -> Result<MetricsTrace> {
    let timing = &cfg.timing;
    let duration = cfg.duration_s();
    let bandwidth = timing.channel_bandwidth_hz;
    let timeline = ChannelTimeline::build(cfg, cfg.tick_s(), stream);
    let plan = AllocationPlan::blocks(cfg.n_aps, cfg.n_channels);
    let mut rec = recorder(cfg);
    for (start, model) in timeline.segments() {
        rec.set_phi(*start, plan.achievable_rates(model, bandwidth));
    }
    let (success_s, collision_s) = match cfg.protocol {
        Protocol::DcfBasic => (timing.seconds(SlotKind::TxopSlot), timing.seconds(SlotKind::BasicCollision)),
        _ => (timing.seconds(SlotKind::RtsCtsSuccess), timing.seconds(SlotKind::RtsCtsExchange)),
    };
    let slot_s = timing.seconds(SlotKind::Backoff);
    let m = cfg.backoff.max_doublings;

    for ch in 0..cfg.n_channels {
        let members: Vec<ApId> = plan.members(ch).collect();
        if members.is_empty() {
            continue;
        }
        let w = if cfg.protocol == Protocol::RtsCtsOptimized {
            optimize_window(members.len(), timing, m, CollisionCost::Rts)?
        } else {
            cfg.backoff.cw_min
        };
        let mut rng = stream.rng(Purpose::Backoff, Some(ch));
        let mut states: Vec<BackoffState> = members
            .iter()
            .map(|_| BackoffState::new(w, m, &mut rng))
            .collect::<Result<_>>()?;
        let mut ready: Vec<usize> = Vec::with_capacity(members.len());
        let mut t = 0.0;
        while t < duration {
            ready.clear();
            ready.extend((0..states.len()).filter(|&i| states[i].decide()));
            match ready.len() {
                0 => {
                    rec.idle(t, 1);
                    for s in &mut states {
                        s.notify(SlotView::IDLE, &mut rng);
                    }
                    t += slot_s;
                }
                k => {
                    let success = k == 1;
                    if success {
                        let ap = members[ready[0]];
                        let bits = timeline.at(t).deliver_bits(ap, ch, bandwidth, timing.txop_us);
                        rec.success(t, ap, bits);
                    } else {
                        rec.collision(t, 1);
                    }
                    for (i, s) in states.iter_mut().enumerate() {
                        let view = if ready.contains(&i) {
                            SlotView::sent(success)
                        } else {
                            SlotView::BUSY
                        };
                        s.notify(view, &mut rng);
                    }
                    t += if success { success_s } else { collision_s };
                }
            }
        }
    }
    Ok(rec.finish())
}

/// Shared TXOP: one wide-band DCF contention among all APs; the winner's
/// TXOP is split over min(N, F) sub-channels. Idle and collision slots are
/// counted per sub-channel so that per-TXOP ratios compare with the
/// per-channel schemes.
fn run_shtxop(cfg: &ScenarioConfig, stream: &RngStream) -> Result<MetricsTrace> {
    let timing = &cfg.timing;
    let duration = cfg.duration_s();
    let bandwidth = timing.channel_bandwidth_hz;
    let (n, f) = (cfg.n_aps, cfg.n_channels);
    let served = n.min(f);
    let timeline = ChannelTimeline::build(cfg, cfg.tick_s(), stream);
    let mut rec = recorder(cfg);
    for (start, model) in timeline.segments() {
        let phi = (0..n)
            .map(|ap| model.row(ap).iter().sum::<f64>() / f as f64 * bandwidth * served as f64 / n as f64)
            .collect();
        rec.set_phi(*start, phi);
    }
    let slot_s = timing.seconds(SlotKind::Backoff);
    let success_s = timing.seconds(SlotKind::ShTxopSuccess);
    let collision_s = timing.seconds(SlotKind::ShTxopCollision);
    let mut rng = stream.rng(Purpose::Backoff, None);
    let mut states: Vec<BackoffState> = (0..n)
        .map(|_| BackoffState::new(cfg.backoff.cw_min, cfg.backoff.max_doublings, &mut rng))
        .collect::<Result<_>>()?;
    let mut t = 0.0;
    while t < duration {
        let round = shtxop_round(&mut states, f, &mut rng);
        if round.idle_slots > 0 {
            rec.idle(t, round.idle_slots * f as u64);
            t += round.idle_slots as f64 * slot_s;
        }
        if t >= duration {
            break;
        }
        match round.outcome {
            RoundOutcome::Shared(plan) => {
                for (ap, _, bits) in plan.credits(timeline.at(t), bandwidth, timing.txop_us) {
                    rec.success(t, ap, bits);
                }
                t += success_s;
            }
            RoundOutcome::Collision(_) => {
                rec.collision(t, f as u64);
                t += collision_s;
            }
        }
    }
    Ok(rec.finish())
}

/// DLCA: all APs act in lock-step, fixed-length contention slots. The
/// controller acts at the end of every period.
fn run_dlca(cfg: &ScenarioConfig, stream: &RngStream) -> Result<MetricsTrace> {
    let timing = &cfg.timing;
    let bandwidth = timing.channel_bandwidth_hz;
    let n = cfg.n_aps;
    let slot_s = cfg.dlca_slot_s();
    let period = cfg.apc_period_slots();
    let total_slots = (cfg.duration_s() / slot_s - 1e-9).ceil() as u64;
    let timeline = ChannelTimeline::build(cfg, cfg.tick_s(), stream);
    let mut rec = recorder(cfg);
    let mut ledger = FairnessLedger::new(n, cfg.n_channels);

    let mut plan = if cfg.protocol.uses_greedy() {
        greedy_pf_allocate(timeline.at(0.0), &ledger, bandwidth, 0)
    } else {
        AllocationPlan::blocks(n, cfg.n_channels)
    };
    rec.set_phi(0.0, plan.achievable_rates(timeline.at(0.0), bandwidth));

    let hp = &cfg.hyperparams;
    let agent_cfg = hp.agent_config();
    let counts = broadcast_contender_counts(&plan);
    let mut agents: Vec<DlcaAgent> = (0..n)
        .map(|ap| {
            let params = QnnParams::dlca(&mut stream.rng(Purpose::Init, Some(ap)));
            DlcaAgent::new(
                params,
                &agent_cfg,
                n,
                counts[ap],
                stream.rng(Purpose::Policy, Some(ap)),
                stream.rng(Purpose::Replay, Some(ap)),
            )
        })
        .collect::<Result<_>>()?;
    let schedule = TrainSchedule {
        batch_size: hp.batch_size,
        learning_rate: hp.learning_rate,
        gamma: hp.gamma,
        history_len: hp.history_len,
        n_aps: n,
    };
    let mut apc_rng = stream.rng(Purpose::Apc, None);

    let mut segment = 0;
    let mut actions = vec![Action::Wait; n];
    let mut served = Vec::with_capacity(cfg.n_channels);
    for slot in 0..total_slots {
        let t = slot as f64 * slot_s;
        let seg = timeline.segment_index(t);
        if seg != segment {
            segment = seg;
            rec.set_phi(t, plan.achievable_rates(timeline.at(t), bandwidth));
        }
        let channel = timeline.at(t);
        for (a, agent) in actions.iter_mut().zip(agents.iter_mut()) {
            *a = agent.act();
        }
        let outcome = dlca_step(&actions, &plan)?;
        served.clear();
        for (f, c) in outcome.channels.iter().enumerate() {
            match c.verdict {
                Verdict::Success(ap) => {
                    let bits = channel.deliver_bits(ap, f, bandwidth, timing.txop_us);
                    rec.success(t, ap, bits);
                    served.push((ap, f, bits / slot_s));
                }
                Verdict::Collision => rec.collision(t, 1),
                Verdict::Idle if plan.per_channel_count[f] > 0 => rec.idle(t, 1),
                Verdict::Idle => {}
            }
        }
        ledger.record_slot(&served);
        for (ap, agent) in agents.iter_mut().enumerate() {
            agent.observe(actions[ap], outcome.feedback[ap], outcome.observations[ap])?;
        }

        if slot % period == period - 1 {
            if cfg.protocol.uses_fomaml() {
                let params: Vec<QnnParams> = agents.iter().map(|a| a.params().clone()).collect();
                let buffers: Vec<_> = agents.iter().map(|a| a.buffer()).collect();
                let global = fomaml_round(&params, &buffers, &schedule, &mut apc_rng)?;
                for a in &mut agents {
                    a.set_params(global.clone());
                }
            }
            if cfg.protocol.uses_greedy() {
                let next_t = (slot + 1) as f64 * slot_s;
                let epoch = (slot + 1) / period;
                plan = greedy_pf_allocate(timeline.at(next_t), &ledger, bandwidth, epoch);
                for (a, c) in agents.iter_mut().zip(broadcast_contender_counts(&plan)) {
                    a.set_contender_count(c);
                }
                rec.set_phi(next_t, plan.achievable_rates(timeline.at(next_t), bandwidth));
            }
        }
    }
    Ok(rec.finish())
}
