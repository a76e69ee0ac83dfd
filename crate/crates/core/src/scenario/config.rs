//! Scenario and experiment configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agent::{AgentConfig, MAX_HISTORY};
use crate::channel::FadingMode;
use crate::error::{Error, Result};
use crate::timing::{SlotKind, TimingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    DcfBasic,
    RtsCts,
    RtsCtsOptimized,
    ShTxop,
    /// DLCA agents on a fixed block allocation, trained independently.
    Dlca,
    /// DLCA with greedy PF channel allocation.
    DlcaGreedy,
    /// DLCA with greedy PF allocation and periodic network merging.
    DlcaGreedyFomaml,
}

impl Protocol {
    pub const ALL: [Protocol; 7] = [
        Protocol::DcfBasic,
        Protocol::RtsCts,
        Protocol::RtsCtsOptimized,
        Protocol::ShTxop,
        Protocol::Dlca,
        Protocol::DlcaGreedy,
        Protocol::DlcaGreedyFomaml,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::DcfBasic => "dcf_basic",
            Protocol::RtsCts => "rts_cts",
            Protocol::RtsCtsOptimized => "rts_cts_optimized",
            Protocol::ShTxop => "sh_txop",
            Protocol::Dlca => "dlca",
            Protocol::DlcaGreedy => "dlca_greedy",
            Protocol::DlcaGreedyFomaml => "dlca_greedy_fomaml",
        }
    }

    pub fn is_dlca(self) -> bool {
        matches!(self, Protocol::Dlca | Protocol::DlcaGreedy | Protocol::DlcaGreedyFomaml)
    }

    pub fn uses_greedy(self) -> bool {
        matches!(self, Protocol::DlcaGreedy | Protocol::DlcaGreedyFomaml)
    }

    pub fn uses_fomaml(self) -> bool {
        self == Protocol::DlcaGreedyFomaml
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown protocol '{s}'")))
    }
}

/// Q-network and controller hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub history_len: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Controller period (allocation and merging), milliseconds.
    pub apc_period_ms: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            gamma: 0.9,
            epsilon: 0.05,
            eta: 0.5,
            history_len: 20,
            batch_size: 32,
            buffer_capacity: 10_000,
            apc_period_ms: 100.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must be in [0, 1], got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must be in [0, 1], got {}", self.eta));
        }
        if self.history_len == 0 || self.history_len > MAX_HISTORY {
            return bad(format!("history_len must be in 1..={MAX_HISTORY}, got {}", self.history_len));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad(format!(
                "need 1 <= batch_size <= buffer_capacity, got {} and {}",
                self.batch_size, self.buffer_capacity
            ));
        }
        if !(self.apc_period_ms > 0.0 && self.apc_period_ms.is_finite()) {
            return bad(format!("apc_period_ms must be positive, got {}", self.apc_period_ms));
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            history_len: self.history_len,
            epsilon: self.epsilon,
            eta: self.eta,
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackoffParams {
    pub cw_min: u32,
    pub max_doublings: u32,
}

impl Default for BackoffParams {
    fn default() -> Self {
        Self {
            cw_min: 32,
            max_doublings: 6,
        }
    }
}

/// Simulated run length. Slot counts are in DLCA contention slots and
/// give every protocol the same simulated time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RunLength {
    Slots(u64),
    Seconds(f64),
}

/// Exchange of two APs' spectral-efficiency rows partway through a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub ap_a: usize,
    pub ap_b: usize,
    /// Position of the swap as a fraction of the run length.
    pub at_fraction: f64,
}

/// One simulated configuration: a protocol on one topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    #[serde(alias = "N")]
    pub n_aps: usize,
    #[serde(alias = "F")]
    pub n_channels: usize,
    pub timing: TimingParams,
    pub hyperparams: Hyperparams,
    pub backoff: BackoffParams,
    pub trials: usize,
    pub seed: u64,
    pub run: RunLength,
    /// Trailing fraction of the run over which summary metrics are taken.
    pub measure_fraction: f64,
    /// Trace bins averaged into each PF-ratio sample.
    pub pf_window_ticks: usize,
    pub fading: FadingMode,
    pub efficiency_range: (f64, f64),
    pub perturbation: Option<Perturbation>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::DlcaGreedyFomaml,
            n_aps: 8,
            n_channels: 8,
            timing: TimingParams::default(),
            hyperparams: Hyperparams::default(),
            backoff: BackoffParams::default(),
            trials: 10,
            seed: 1,
            run: RunLength::Slots(50_000),
            measure_fraction: 0.1,
            pf_window_ticks: 10,
            fading: FadingMode::BlockConstant,
            efficiency_range: (1.0, 3.0),
            perturbation: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_aps == 0 || self.n_channels == 0 {
            return bad(format!("need N >= 1 and F >= 1, got N={}, F={}", self.n_aps, self.n_channels));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        self.timing.validate()?;
        if self.protocol.is_dlca() {
            self.hyperparams.validate()?;
        }
        let b = self.backoff;
        if b.cw_min == 0 || b.max_doublings > 16 || (b.cw_min as u64) << b.max_doublings > u32::MAX as u64 {
            return bad(format!("invalid backoff window W={}, m={}", b.cw_min, b.max_doublings));
        }
        match self.run {
            RunLength::Slots(0) => return bad("run length must be positive".into()),
            RunLength::Seconds(s) if !(s > 0.0 && s.is_finite()) => {
                return bad(format!("run length must be positive, got {s} s"))
            }
            _ => {}
        }
        if !(self.measure_fraction > 0.0 && self.measure_fraction <= 1.0) {
            return bad(format!("measure_fraction must be in (0, 1], got {}", self.measure_fraction));
        }
        if self.pf_window_ticks == 0 {
            return bad("pf_window_ticks must be at least 1".into());
        }
        let (lo, hi) = self.efficiency_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!("efficiency_range must satisfy 0 < lo < hi, got ({lo}, {hi})"));
        }
        if let Some(p) = self.perturbation {
            if p.ap_a >= self.n_aps || p.ap_b >= self.n_aps || p.ap_a == p.ap_b {
                return bad(format!("perturbation must swap two distinct APs below N={}", self.n_aps));
            }
            if !(p.at_fraction > 0.0 && p.at_fraction < 1.0) {
                return bad(format!("perturbation at_fraction must be in (0, 1), got {}", p.at_fraction));
            }
        }
        Ok(())
    }

    pub fn dlca_slot_s(&self) -> f64 {
        self.timing.seconds(SlotKind::DlcaContention)
    }

    /// Controller period in DLCA slots (at least one).
    pub fn apc_period_slots(&self) -> u64 {
        let slots = (self.hyperparams.apc_period_ms * 1e-3 / self.dlca_slot_s()).round();
        slots.max(1.0) as u64
    }

    /// Trace bin length: one controller period.
    pub fn tick_s(&self) -> f64 {
        self.apc_period_slots() as f64 * self.dlca_slot_s()
    }

    pub fn duration_s(&self) -> f64 {
        match self.run {
            RunLength::Slots(n) => n as f64 * self.dlca_slot_s(),
            RunLength::Seconds(s) => s,
        }
    }

    pub fn measure_start_s(&self) -> f64 {
        self.duration_s() * (1.0 - self.measure_fraction)
    }
}

/// A set of scenario points: every protocol on every (N, F).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub base: ScenarioConfig,
    pub protocols: Vec<Protocol>,
    pub n_values: Vec<usize>,
    pub f_values: Vec<usize>,
}

/// Keys of an experiment file that are not scenario fields.
const EXPERIMENT_KEYS: [&str; 5] = ["preset", "name", "protocols", "n_values", "f_values"];

/// Sections whose fields are overridden one by one; every other key is
/// replaced wholesale.
const NESTED_SECTIONS: [&str; 3] = ["timing", "hyperparams", "backoff"];

fn merge(into: &mut serde_json::Map<String, Value>, over: serde_json::Map<String, Value>) {
    for (k, v) in over {
        match (into.get_mut(&k), v) {
            (Some(Value::Object(a)), Value::Object(b)) if NESTED_SECTIONS.contains(&k.as_str()) => {
                for (field, value) in b {
                    a.insert(field, value);
                }
            }
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

impl Experiment {
    pub fn single(base: ScenarioConfig) -> Self {
        Self {
            name: base.protocol.name().to_string(),
            protocols: vec![base.protocol],
            n_values: vec![base.n_aps],
            f_values: vec![base.n_channels],
            base,
        }
    }

    /// Parses an experiment document: an optional `preset` to start from,
    /// optional sweep lists, and scenario fields overriding the base.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let Value::Object(mut obj) = doc else {
            return Err(Error::Config("experiment file must be a JSON object".into()));
        };
        let (mut exp, from_preset) = match obj.remove("preset") {
            Some(Value::String(name)) => (
                crate::scenario::preset(&name).ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?,
                true,
            ),
            Some(_) => return Err(Error::Config("preset must be a string".into())),
            None => (Experiment::single(ScenarioConfig::default()), false),
        };
        let name = obj.remove("name");
        let protocols = obj.remove("protocols");
        let n_values = obj.remove("n_values");
        let f_values = obj.remove("f_values");
        debug_assert!(EXPERIMENT_KEYS.iter().all(|k| !obj.contains_key(*k)));

        let had_protocol = obj.contains_key("protocol");
        let had_n = obj.contains_key("n_aps") || obj.contains_key("N");
        let had_f = obj.contains_key("n_channels") || obj.contains_key("F");
        // Normalise aliases so that merging replaces the base value.
        for (alias, key) in [("N", "n_aps"), ("F", "n_channels")] {
            if let Some(v) = obj.remove(alias) {
                obj.insert(key.to_string(), v);
            }
        }
        let Value::Object(mut base) = serde_json::to_value(&exp.base)? else {
            unreachable!("a scenario serialises to an object")
        };
        merge(&mut base, obj);
        exp.base = serde_json::from_value(Value::Object(base))?;

        match protocols {
            Some(v) => exp.protocols = serde_json::from_value(v)?,
            None if had_protocol => exp.protocols = vec![exp.base.protocol],
            None => {}
        }
        match n_values {
            Some(v) => exp.n_values = serde_json::from_value(v)?,
            None if had_n => exp.n_values = vec![exp.base.n_aps],
            None => {}
        }
        match f_values {
            Some(v) => exp.f_values = serde_json::from_value(v)?,
            None if had_f => exp.f_values = vec![exp.base.n_channels],
            None => {}
        }
        match name {
            Some(v) => exp.name = serde_json::from_value(v)?,
            None if !from_preset && exp.protocols.len() == 1 => exp.name = exp.protocols[0].name().to_string(),
            None if !from_preset => exp.name = "experiment".to_string(),
            None => {}
        }
        exp.validate()?;
        Ok(exp)
    }

    /// Every scenario point, ordered by F, then N, then protocol.
    pub fn points(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &f in &self.f_values {
            for &n in &self.n_values {
                for &p in &self.protocols {
                    let mut c = self.base.clone();
                    c.protocol = p;
                    c.n_aps = n;
                    c.n_channels = f;
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.protocols.is_empty() || self.n_values.is_empty() || self.f_values.is_empty() {
            return Err(Error::Config("protocols, n_values and f_values must be non-empty".into()));
        }
        for c in self.points() {
            c.validate()
                .map_err(|e| Error::Config(format!("{} N={} F={}: {e}", c.protocol, c.n_aps, c.n_channels)))?;
        }
        Ok(())
    }
}
