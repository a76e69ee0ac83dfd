//! Per-AP learner: MDP state, reward estimation, replay and ε-greedy policy.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::medium::{Feedback, Observation};
use crate::qnn::{Batch, QnnParams, Workspace};
use crate::rng::SimRng;

/// Longest supported history; the snapshot packs 2L bits into a `u64`.
pub const MAX_HISTORY: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Wait = 0,
    Contend = 1,
}

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Action::Wait
        } else {
            Action::Contend
        }
    }
}

/// Compact copy of an [`AgentState`]: bit `2k` holds the k-th oldest
/// action, bit `2k + 1` the observation that followed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSnapshot {
    pub history_bits: u64,
    pub contender_count: u32,
}

impl StateSnapshot {
    /// Writes the `2L + 1` network inputs: the history as 0/1 values,
    /// oldest first, then `contender_count / n_aps`.
    pub fn encode_into(&self, history_len: usize, n_aps: usize, out: &mut [f64]) {
        let width = 2 * history_len;
        debug_assert_eq!(out.len(), width + 1);
        for (k, v) in out[..width].iter_mut().enumerate() {
            *v = ((self.history_bits >> k) & 1) as f64;
        }
        out[width] = self.contender_count as f64 / n_aps as f64;
    }
}

/// The MDP state of one AP: the last L (action, next observation) pairs
/// and the number of APs contending on its primary channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentState {
    history_len: usize,
    filled: usize,
    bits: u64,
    contender_count: u32,
}

impl AgentState {
    pub fn new(history_len: usize, contender_count: u32) -> Result<Self> {
        if history_len == 0 || history_len > MAX_HISTORY {
            return Err(Error::Config(format!(
                "history length must be in 1..={MAX_HISTORY}, got {history_len}"
            )));
        }
        if contender_count == 0 {
            return Err(Error::Config("contender count includes the AP itself".into()));
        }
        Ok(Self {
            history_len,
            filled: 0,
            bits: 0,
            contender_count,
        })
    }

    pub fn history_len(&self) -> usize {
        self.history_len
    }

    /// Number of recorded pairs, saturating at L.
    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn contender_count(&self) -> u32 {
        self.contender_count
    }

    pub fn set_contender_count(&mut self, c: u32) {
        assert!(c >= 1, "contender count includes the AP itself");
        self.contender_count = c;
    }

    /// Appends `(a_t, o_{t+1})`, dropping the oldest pair once full.
    pub fn push(&mut self, action: Action, next_observation: Observation) {
        let top = 2 * self.history_len - 2;
        let pair = action as u64 | (next_observation as u64) << 1;
        self.bits = (self.bits >> 2) | pair << top;
        self.filled = (self.filled + 1).min(self.history_len);
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            history_bits: self.bits,
            contender_count: self.contender_count,
        }
    }

    /// Pairs oldest first; unfilled positions at the front read as zero.
    pub fn pairs(&self) -> Vec<(u8, u8)> {
        (0..self.history_len)
            .map(|k| (((self.bits >> (2 * k)) & 1) as u8, ((self.bits >> (2 * k + 1)) & 1) as u8))
            .collect()
    }
}

/// Network input for `state`, length `2L + 1`.
pub fn encode_state(state: &AgentState, n_aps: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * state.history_len + 1];
    state.snapshot().encode_into(state.history_len, n_aps, &mut out);
    out
}

fn feedback_value(f: Feedback) -> f64 {
    match f {
        Feedback::Ack | Feedback::Cts => 1.0,
        Feedback::Timeout => -1.0,
        Feedback::None => 0.0,
    }
}

/// Reward of the current step.
///
/// `window` holds the feedback of the last (at most L) steps, oldest first
/// and ending with the current step; `Feedback::None` marks a step where
/// the AP waited. A transmission is scored by folding the window with
/// `r <- eta * r + y`, where `y` is +1 for an ACK, -1 for a failed
/// transmission and 0 for a wait, so that a step `l` slots back carries
/// weight `eta^l`. A wait is scored +1 if the channel turned out busy and
/// -1 if it stayed idle.
pub fn estimate_reward(action: Action, window: &[Feedback], next_observation: Observation, eta: f64) -> f64 {
    match action {
        Action::Contend => window.iter().fold(0.0, |r, &f| eta * r + feedback_value(f)),
        Action::Wait => match next_observation {
            Observation::Busy => 1.0,
            Observation::Idle => -1.0,
        },
    }
}

/// ε-greedy choice over `(Q(s, wait), Q(s, contend))`; ties go to contend.
pub fn select_action<R: Rng>(q: [f64; 2], epsilon: f64, rng: &mut R) -> Action {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        if rng.random::<bool>() {
            Action::Contend
        } else {
            Action::Wait
        }
    } else if q[1] >= q[0] {
        Action::Contend
    } else {
        Action::Wait
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: StateSnapshot,
    pub action: Action,
    pub reward: f64,
    pub next_state: StateSnapshot,
}

/// FIFO replay memory.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(t);
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.entries.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter()
    }

    /// `batch` distinct indices, uniformly at random.
    pub fn sample_indices<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        index::sample(rng, self.entries.len(), batch.min(self.entries.len())).into_vec()
    }
}

/// Training hyper-parameters needed by [`record_and_maybe_train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub history_len: usize,
    pub n_aps: usize,
}

/// Encodes the given transitions into `batch`.
pub fn fill_batch<'a>(
    batch: &mut Batch,
    transitions: impl IntoIterator<Item = &'a Transition>,
    history_len: usize,
    n_aps: usize,
) {
    batch.clear();
    let width = 2 * history_len + 1;
    let mut s = vec![0.0; width];
    let mut s2 = vec![0.0; width];
    for t in transitions {
        t.state.encode_into(history_len, n_aps, &mut s);
        t.next_state.encode_into(history_len, n_aps, &mut s2);
        batch.push(&s, t.action.index(), t.reward, &s2);
    }
}

/// Stores `transition` and, once the buffer holds a full batch, takes one
/// semi-gradient step on a uniformly sampled batch. Returns the loss of
/// that step.
pub fn record_and_maybe_train(
    transition: Transition,
    buffer: &mut ReplayBuffer,
    params: &mut QnnParams,
    schedule: &TrainSchedule,
    scratch: &mut (Workspace, Batch),
    rng: &mut SimRng,
) -> Result<Option<f64>> {
    buffer.push(transition);
    if buffer.len() < schedule.batch_size {
        return Ok(None);
    }
    let picks = buffer.sample_indices(schedule.batch_size, rng);
    let (ws, batch) = scratch;
    fill_batch(batch, picks.iter().map(|&i| &buffer.entries[i]), schedule.history_len, schedule.n_aps);
    params
        .semi_gradient_update(batch, schedule.learning_rate, schedule.gamma, ws)
        .map(Some)
}

/// Agent hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub history_len: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
}

/// One AP's complete learner.
#[derive(Debug, Clone)]
pub struct DlcaAgent {
    params: QnnParams,
    state: AgentState,
    feedback: VecDeque<Feedback>,
    buffer: ReplayBuffer,
    schedule: TrainSchedule,
    epsilon: f64,
    eta: f64,
    scratch: (Workspace, Batch),
    input: Vec<f64>,
    policy_rng: SimRng,
    replay_rng: SimRng,
    last_loss: Option<f64>,
}

impl DlcaAgent {
    pub fn new(
        params: QnnParams,
        cfg: &AgentConfig,
        n_aps: usize,
        contender_count: u32,
        policy_rng: SimRng,
        replay_rng: SimRng,
    ) -> Result<Self> {
        let width = 2 * cfg.history_len + 1;
        if params.input_width() != width || params.output_width() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "agent needs a {width} -> 2 network, got layout {:?}",
                params.layout()
            )));
        }
        Ok(Self {
            params,
            state: AgentState::new(cfg.history_len, contender_count)?,
            feedback: VecDeque::with_capacity(cfg.history_len),
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            schedule: TrainSchedule {
                batch_size: cfg.batch_size,
                learning_rate: cfg.learning_rate,
                gamma: cfg.gamma,
                history_len: cfg.history_len,
                n_aps,
            },
            epsilon: cfg.epsilon,
            eta: cfg.eta,
            scratch: Default::default(),
            input: vec![0.0; width],
            policy_rng,
            replay_rng,
            last_loss: None,
        })
    }

    pub fn params(&self) -> &QnnParams {
        &self.params
    }

    pub fn set_params(&mut self, params: QnnParams) {
        self.params = params;
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    pub fn set_contender_count(&mut self, c: u32) {
        self.state.set_contender_count(c);
    }

    pub fn q_values(&mut self) -> [f64; 2] {
        self.state
            .snapshot()
            .encode_into(self.schedule.history_len, self.schedule.n_aps, &mut self.input);
        self.params.q_values(&self.input, &mut self.scratch.0)
    }

    pub fn act(&mut self) -> Action {
        let q = self.q_values();
        select_action(q, self.epsilon, &mut self.policy_rng)
    }

    /// Scores the step just taken, stores the transition and trains.
    /// Returns the reward.
    pub fn observe(&mut self, action: Action, feedback: Feedback, next_observation: Observation) -> Result<f64> {
        if self.feedback.len() == self.schedule.history_len {
            self.feedback.pop_front();
        }
        self.feedback.push_back(feedback);
        let (a, b) = self.feedback.as_slices();
        let reward = if b.is_empty() {
            estimate_reward(action, a, next_observation, self.eta)
        } else {
            let window: Vec<Feedback> = a.iter().chain(b).copied().collect();
            estimate_reward(action, &window, next_observation, self.eta)
        };
        let state = self.state.snapshot();
        self.state.push(action, next_observation);
        let t = Transition {
            state,
            action,
            reward,
            next_state: self.state.snapshot(),
        };
        if let Some(loss) = record_and_maybe_train(
            t,
            &mut self.buffer,
            &mut self.params,
            &self.schedule,
            &mut self.scratch,
            &mut self.replay_rng,
        )? {
            self.last_loss = Some(loss);
        }
        Ok(reward)
    }
}
