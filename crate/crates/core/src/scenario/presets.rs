//! Named experiments covering the protocol comparison.

use crate::scenario::config::{Experiment, Perturbation, Protocol, RunLength, ScenarioConfig};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> Experiment,
}

impl Preset {
    pub fn experiment(&self) -> Experiment {
        (self.build)()
    }
}

fn n_sweep() -> Vec<usize> {
    (8..=56).step_by(8).collect()
}

fn experiment(name: &str, protocols: &[Protocol], n_values: Vec<usize>, f_values: Vec<usize>) -> Experiment {
    Experiment {
        name: name.to_string(),
        base: ScenarioConfig::default(),
        protocols: protocols.to_vec(),
        n_values,
        f_values,
    }
}

const THROUGHPUT_SET: [Protocol; 5] = [
    Protocol::DcfBasic,
    Protocol::RtsCts,
    Protocol::RtsCtsOptimized,
    Protocol::ShTxop,
    Protocol::DlcaGreedyFomaml,
];

fn throughput() -> Experiment {
    experiment("throughput", &THROUGHPUT_SET, n_sweep(), vec![4, 8, 16])
}

fn collisions() -> Experiment {
    experiment("collisions", &THROUGHPUT_SET, n_sweep(), vec![8])
}

fn idle() -> Experiment {
    experiment("idle", &THROUGHPUT_SET, n_sweep(), vec![8])
}

fn convergence() -> Experiment {
    let mut e = experiment(
        "convergence",
        &[Protocol::Dlca, Protocol::DlcaGreedy, Protocol::DlcaGreedyFomaml],
        vec![16],
        vec![8],
    );
    e.base.trials = 5;
    e
}

fn utility() -> Experiment {
    experiment(
        "utility",
        &[Protocol::RtsCtsOptimized, Protocol::ShTxop, Protocol::DlcaGreedyFomaml],
        n_sweep(),
        vec![8],
    )
}

fn pf_recovery() -> Experiment {
    let mut e = experiment("pf_recovery", &[Protocol::DlcaGreedyFomaml], vec![18], vec![8]);
    e.base.perturbation = Some(Perturbation {
        ap_a: 0,
        ap_b: 9,
        at_fraction: 0.3,
    });
    e
}

fn smoke() -> Experiment {
    let mut e = experiment(
        "smoke",
        &[Protocol::RtsCts, Protocol::ShTxop, Protocol::DlcaGreedyFomaml],
        vec![4],
        vec![2],
    );
    e.base.trials = 2;
    e.base.run = RunLength::Slots(1_000);
    e
}

pub const PRESETS: [Preset; 8] = [
    Preset {
        name: "throughput",
        description: "aggregate throughput vs N for F in {4, 8, 16}",
        build: throughput,
    },
    Preset {
        name: "collisions",
        description: "collision slots per TXOP vs N, F = 8",
        build: collisions,
    },
    Preset {
        name: "idle",
        description: "idle slots per TXOP vs N, F = 8",
        build: idle,
    },
    Preset {
        name: "convergence",
        description: "throughput convergence trace of the DLCA variants, N = 16, F = 8",
        build: convergence,
    },
    Preset {
        name: "utility",
        description: "network utility vs N, F = 8",
        build: utility,
    },
    Preset {
        name: "pf_recovery",
        description: "PF-ratio trace with an efficiency swap at 30% of the run, N = 18, F = 8",
        build: pf_recovery,
    },
    Preset {
        name: "smoke",
        description: "tiny three-protocol run for quick checks",
        build: smoke,
    },
    Preset {
        name: "default",
        description: "a single dlca_greedy_fomaml point, N = 8, F = 8",
        build: || Experiment {
            name: "default".into(),
            ..Experiment::single(ScenarioConfig::default())
        },
    },
];

pub fn preset(name: &str) -> Option<Experiment> {
    PRESETS.iter().find(|p| p.name == name).map(Preset::experiment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for p in &PRESETS {
            p.experiment().validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert_eq!(p.experiment().name, p.name);
        }
    }

    #[test]
    fn throughput_shape() {
        let e = preset("throughput").unwrap();
        assert_eq!(e.n_values, vec![8, 16, 24, 32, 40, 48, 56]);
        assert_eq!(e.points().len(), 7 * 3 * THROUGHPUT_SET.len());
    }
}
