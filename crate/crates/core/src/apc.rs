//! Central AP controller: primary-channel allocation for proportional
//! fairness and periodic merging of the agents' Q-networks.

use rand::seq::index;

use crate::agent::{fill_batch, ReplayBuffer, TrainSchedule};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::qnn::{average_params, Batch, GradientSet, QnnParams, Workspace};
use crate::rng::SimRng;
use crate::{ApId, ChannelId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationPlan {
    pub primary_channel: Vec<ChannelId>,
    pub per_channel_count: Vec<usize>,
    pub epoch: u64,
}

impl AllocationPlan {
    pub fn from_assignment(primary_channel: Vec<ChannelId>, n_channels: usize, epoch: u64) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::Config("at least one channel is required".into()));
        }
        let mut per_channel_count = vec![0; n_channels];
        for (ap, &f) in primary_channel.iter().enumerate() {
            if f >= n_channels {
                return Err(Error::Config(format!("AP {ap} assigned to missing channel {f}")));
            }
            per_channel_count[f] += 1;
        }
        Ok(Self {
            primary_channel,
            per_channel_count,
            epoch,
        })
    }

    /// Static split into contiguous blocks: AP `i` uses channel
    /// `floor(i * F / N)`.
    pub fn blocks(n_aps: usize, n_channels: usize) -> Self {
        let primary = (0..n_aps).map(|i| i * n_channels / n_aps).collect();
        Self::from_assignment(primary, n_channels, 0).expect("block split is always valid")
    }

    pub fn n_aps(&self) -> usize {
        self.primary_channel.len()
    }

    pub fn n_channels(&self) -> usize {
        self.per_channel_count.len()
    }

    pub fn contenders(&self, ap: ApId) -> usize {
        self.per_channel_count[self.primary_channel[ap]]
    }

    /// APs assigned to `channel`, ascending.
    pub fn members(&self, channel: ChannelId) -> impl Iterator<Item = ApId> + '_ {
        self.primary_channel
            .iter()
            .enumerate()
            .filter(move |(_, &f)| f == channel)
            .map(|(ap, _)| ap)
    }

    /// Static-plan share `C^n(f) * B / n(f)` of every AP.
    pub fn achievable_rates(&self, channel: &ChannelModel, bandwidth_hz: f64) -> Vec<f64> {
        (0..self.n_aps())
            .map(|ap| {
                let f = self.primary_channel[ap];
                channel.get(ap, f) * bandwidth_hz / self.per_channel_count[f] as f64
            })
            .collect()
    }
}

/// Contender count each AP feeds into its state.
pub fn broadcast_contender_counts(plan: &AllocationPlan) -> Vec<u32> {
    (0..plan.n_aps()).map(|ap| plan.contenders(ap) as u32).collect()
}

/// Running average throughput of every AP.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessLedger {
    pub avg_throughput: Vec<f64>,
    /// Rate of each AP on each channel in the latest slot; at most one
    /// non-zero entry per AP.
    pub instantaneous_rate: Vec<Vec<f64>>,
    pub slot_index: u64,
}

impl FairnessLedger {
    pub fn new(n_aps: usize, n_channels: usize) -> Self {
        Self {
            avg_throughput: vec![0.0; n_aps],
            instantaneous_rate: vec![vec![0.0; n_channels]; n_aps],
            slot_index: 0,
        }
    }

    /// `D_t = (1 - 1/t) D_{t-1} + x_t / t`.
    pub fn update_average_throughput(&mut self, ap: ApId, t: u64, delivered: f64) -> Result<()> {
        if t == 0 {
            return Err(Error::ZeroSlotIndex);
        }
        let t = t as f64;
        let d = &mut self.avg_throughput[ap];
        *d = (1.0 - 1.0 / t) * *d + delivered / t;
        Ok(())
    }

    /// Records one slot in which each listed `(ap, channel, rate)` was
    /// served; every other AP gets rate zero.
    pub fn record_slot(&mut self, served: &[(ApId, ChannelId, f64)]) {
        self.slot_index += 1;
        for row in &mut self.instantaneous_rate {
            row.fill(0.0);
        }
        for &(ap, f, rate) in served {
            self.instantaneous_rate[ap][f] = rate;
        }
        let t = self.slot_index;
        for ap in 0..self.avg_throughput.len() {
            let x: f64 = self.instantaneous_rate[ap].iter().sum();
            self.update_average_throughput(ap, t, x).expect("slot index starts at 1");
        }
    }
}

/// Greedy proportional-fair primary-channel allocation.
///
/// APs are placed one at a time in ascending id order. An AP goes to an
/// unused channel whenever one is left (the shared rate `C / n(f)` is
/// unbounded there); otherwise to the channel maximising
/// `C^n(f) * B / (n(f) + 1) / D^n`, counting itself among the sharers.
/// Ties go to the lowest channel index. Dividing by the AP's own average
/// throughput does not change its argmax, so starving APs with `D = 0`
/// are handled by the same rule.
pub fn greedy_pf_allocate(
    channel: &ChannelModel,
    ledger: &FairnessLedger,
    bandwidth_hz: f64,
    epoch: u64,
) -> AllocationPlan {
    let n_aps = channel.n_aps();
    let n_channels = channel.n_channels();
    let mut counts = vec![0usize; n_channels];
    let mut primary = Vec::with_capacity(n_aps);
    for ap in 0..n_aps {
        let any_empty = counts.contains(&0);
        let d = ledger.avg_throughput.get(ap).copied().unwrap_or(0.0);
        let norm = if d > 0.0 { d } else { 1.0 };
        let mut best: Option<(ChannelId, f64)> = None;
        for f in 0..n_channels {
            if any_empty && counts[f] != 0 {
                continue;
            }
            let phi = channel.get(ap, f) * bandwidth_hz / (counts[f] + 1) as f64;
            let score = phi / norm;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((f, score));
            }
        }
        let (f, _) = best.expect("at least one channel");
        counts[f] += 1;
        primary.push(f);
    }
    AllocationPlan {
        primary_channel: primary,
        per_channel_count: counts,
        epoch,
    }
}

/// One merge round: average every agent's network, then take a single
/// semi-gradient step on a batch drawn uniformly from the union of all
/// replay buffers. Each sample's TD error and gradient are evaluated at
/// the network of the AP that stored it. With no stored samples the round
/// is a plain average.
pub fn fomaml_round(
    params: &[QnnParams],
    buffers: &[&ReplayBuffer],
    schedule: &TrainSchedule,
    rng: &mut SimRng,
) -> Result<QnnParams> {
    if params.len() != buffers.len() {
        return Err(Error::Config(format!(
            "{} networks but {} replay buffers",
            params.len(),
            buffers.len()
        )));
    }
    let mut global = average_params(params)?;
    let total: usize = buffers.iter().map(|b| b.len()).sum();
    if total == 0 {
        return Ok(global);
    }
    let picks = index::sample(rng, total, schedule.batch_size.min(total)).into_vec();
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); buffers.len()];
    for i in picks.iter().copied() {
        let mut i = i;
        for (owner, b) in buffers.iter().enumerate() {
            if i < b.len() {
                owned[owner].push(i);
                break;
            }
            i -= b.len();
        }
    }
    let scale = 1.0 / picks.len() as f64;
    let mut grad = GradientSet::zeros_like(&global);
    let mut ws = Workspace::default();
    let mut batch = Batch::default();
    let mut sq_sum = 0.0;
    for (owner, idx) in owned.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let b = buffers[owner];
        fill_batch(&mut batch, idx.iter().map(|&i| b.get(i).unwrap()), schedule.history_len, schedule.n_aps);
        sq_sum += params[owner]
            .semi_gradient(&batch, schedule.gamma, scale, &mut ws, &mut grad)
            .iter()
            .sum::<f64>();
    }
    if !sq_sum.is_finite() {
        return Err(Error::Divergence(sq_sum));
    }
    global.apply(&grad, schedule.learning_rate);
    Ok(global)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ledger_recursion_examples() {
        let mut l = FairnessLedger::new(1, 1);
        l.update_average_throughput(0, 1, 100.0).unwrap();
        assert_eq!(l.avg_throughput[0], 100.0);
        l.update_average_throughput(0, 2, 0.0).unwrap();
        assert_eq!(l.avg_throughput[0], 50.0);
        assert!(matches!(l.update_average_throughput(0, 0, 1.0), Err(Error::ZeroSlotIndex)));

        let mut c = FairnessLedger::new(1, 2);
        for _ in 0..1000 {
            c.record_slot(&[(0, 1, 7.0)]);
            assert!((c.avg_throughput[0] - 7.0).abs() < 1e-12);
        }
        assert_eq!(c.instantaneous_rate[0], vec![0.0, 7.0]);
    }

    #[test]
    fn greedy_single_ap_picks_best_channel() {
        let ch = ChannelModel::from_rows(&[vec![1.0, 3.0]]);
        let plan = greedy_pf_allocate(&ch, &FairnessLedger::new(1, 2), 20e6, 0);
        assert_eq!(plan.primary_channel, vec![1]);
    }

    #[test]
    fn greedy_prefers_an_unused_channel() {
        // Sharing f0 would give AP 1 a rate of 3/2 against 1 alone on f1,
        // but the split lifts the log-utility from 2 ln 1.5 to ln 3.
        let ch = ChannelModel::from_rows(&[vec![3.0, 1.0], vec![3.0, 1.0]]);
        let plan = greedy_pf_allocate(&ch, &FairnessLedger::new(2, 2), 20e6, 0);
        assert_eq!(plan.primary_channel, vec![0, 1]);
    }

    #[test]
    fn greedy_shares_by_count_once_channels_are_used() {
        let ch = ChannelModel::from_rows(&[vec![3.0, 1.0], vec![1.0, 3.0], vec![2.8, 1.2]]);
        let plan = greedy_pf_allocate(&ch, &FairnessLedger::new(3, 2), 20e6, 4);
        // AP 2: 2.8 / 2 = 1.4 on f0 beats 1.2 / 2 = 0.6 on f1.
        assert_eq!(plan.primary_channel, vec![0, 1, 0]);
        assert_eq!(plan.per_channel_count, vec![2, 1]);
        assert_eq!(plan.epoch, 4);
    }

    #[test]
    fn contender_counts() {
        let all = AllocationPlan::from_assignment(vec![0, 0, 0], 2, 0).unwrap();
        assert_eq!(broadcast_contender_counts(&all), vec![3, 3, 3]);
        let unique = AllocationPlan::from_assignment(vec![0, 1, 2], 3, 0).unwrap();
        assert_eq!(broadcast_contender_counts(&unique), vec![1, 1, 1]);
        let mixed = AllocationPlan::from_assignment(vec![0, 0, 1], 2, 0).unwrap();
        assert_eq!(broadcast_contender_counts(&mixed), vec![2, 2, 1]);
    }

    #[test]
    fn block_split() {
        assert_eq!(AllocationPlan::blocks(8, 8).primary_channel, (0..8).collect::<Vec<_>>());
        assert_eq!(AllocationPlan::blocks(4, 2).primary_channel, vec![0, 0, 1, 1]);
        assert_eq!(AllocationPlan::blocks(3, 2).per_channel_count, vec![2, 1]);
        assert!(AllocationPlan::from_assignment(vec![0, 2], 2, 0).is_err());
    }

    #[test]
    fn merge_with_empty_buffers_is_the_average() {
        use crate::rng::{Purpose, RngStream};
        let s = RngStream::new(3);
        let a = QnnParams::init(&[5, 4, 2], &mut s.rng(Purpose::Init, Some(0)));
        let empty = ReplayBuffer::new(10);
        let sched = TrainSchedule {
            batch_size: 4,
            learning_rate: 0.1,
            gamma: 0.9,
            history_len: 2,
            n_aps: 2,
        };
        let out = fomaml_round(&[a.clone(), a.clone()], &[&empty, &empty], &sched, &mut s.rng(Purpose::Apc, None)).unwrap();
        assert_eq!(out, a);
    }
}
