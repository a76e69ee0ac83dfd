//! CSV emission: fixed-decimal numbers with 9 significant digits and a
//! `#` metadata header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::scenario::{Experiment, RunReport};

/// `x` in fixed (non-exponent) notation rounded to 9 significant digits.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Let the formatter do the rounding, then read off the exponent.
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (8 - exp).max(0) as usize;
    let rounded: f64 = sci.parse().unwrap();
    format!("{rounded:.decimals$}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

/// First 16 hex digits of the SHA-256 of the experiment's canonical JSON.
pub fn config_hash(exp: &Experiment) -> String {
    let json = serde_json::to_string(exp).expect("experiment serialises");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn header(kind: &str, exp: &Experiment) -> String {
    format!(
        "# {kind}\n# experiment={}\n# seed={}\n# config_hash={}\n",
        exp.name,
        exp.base.seed,
        config_hash(exp)
    )
}

/// One row per scenario point with the trial means.
pub fn summary_csv(exp: &Experiment, reports: &[RunReport]) -> String {
    let mut out = header("summary", exp);
    out.push_str(
        "protocol,n_aps,n_channels,trials,throughput_bps,utility,starved_trials,\
         collisions_per_txop,idle_per_txop,collision_slots,idle_slots,success_slots\n",
    );
    for r in reports {
        let (c, m) = (&r.config, &r.mean);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.protocol,
            c.n_aps,
            c.n_channels,
            r.trials.len(),
            format_sig(m.throughput_bps),
            opt(m.utility),
            m.starved_trials,
            format_sig(m.collisions_per_txop),
            format_sig(m.idle_per_txop),
            format_sig(m.collision_slots),
            format_sig(m.idle_slots),
            format_sig(m.success_slots),
        );
    }
    out
}

/// One row per scenario point and trace bin, trial means, with per-AP PF
/// ratios in columns `b_0 ..`.
pub fn trace_csv(exp: &Experiment, reports: &[RunReport]) -> String {
    let width = reports.iter().map(|r| r.config.n_aps).max().unwrap_or(0);
    let mut out = header("trace", exp);
    out.push_str("protocol,n_aps,n_channels,tick,end_time_s,throughput_bps,collisions,idle,pf_spread");
    for ap in 0..width {
        let _ = write!(out, ",b_{ap}");
    }
    out.push('\n');
    for r in reports {
        let c = &r.config;
        for t in &r.mean.ticks {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.protocol,
                c.n_aps,
                c.n_channels,
                t.index,
                format_sig(t.end_time_s),
                format_sig(t.throughput_bps),
                format_sig(t.collisions),
                format_sig(t.idle),
                format_sig(t.pf_spread),
            );
            for ap in 0..width {
                out.push(',');
                if let Some(b) = t.pf_ratio.get(ap) {
                    out.push_str(&format_sig(*b));
                }
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `summary.csv` and `trace.csv` into `dir`, creating it if needed.
pub fn emit_csv(exp: &Experiment, reports: &[RunReport], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let summary = dir.join("summary.csv");
    let trace = dir.join("trace.csv");
    fs::write(&summary, summary_csv(exp, reports))?;
    fs::write(&trace, trace_csv(exp, reports))?;
    Ok((summary, trace))
}
