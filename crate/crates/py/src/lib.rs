//! Python bindings: run experiments, query presets and call the analytical
//! model and the channel allocator directly.

use dlca_core::analytics::{bianchi_fixed_point, optimize_window, CollisionCost};
use dlca_core::apc::{greedy_pf_allocate, FairnessLedger};
use dlca_core::channel::ChannelModel;
use dlca_core::qnn::{QnnParams, Workspace, STATE_WIDTH};
use dlca_core::rng::{Purpose, RngStream};
use dlca_core::scenario::{run_experiment, summary_csv, trace_csv, Experiment, PRESETS};
use dlca_core::timing::TimingParams;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// `(name, description)` of every built-in experiment.
#[pyfunction]
fn presets() -> Vec<(String, String)> {
    PRESETS
        .iter()
        .map(|p| (p.name.to_string(), p.description.to_string()))
        .collect()
}

/// Runs an experiment document (JSON text) and returns one dict of mean
/// metrics per scenario point.
#[pyfunction]
fn run<'py>(py: Python<'py>, config_json: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let exp = Experiment::from_json(config_json).map_err(value_err)?;
    let reports = py.detach(|| run_experiment(&exp)).map_err(value_err)?;
    reports
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("protocol", r.config.protocol.name())?;
            d.set_item("n_aps", r.config.n_aps)?;
            d.set_item("n_channels", r.config.n_channels)?;
            d.set_item("throughput_bps", r.mean.throughput_bps)?;
            d.set_item("utility", r.mean.utility)?;
            d.set_item("collisions_per_txop", r.mean.collisions_per_txop)?;
            d.set_item("idle_per_txop", r.mean.idle_per_txop)?;
            d.set_item("trials", r.trials.len())?;
            Ok(d)
        })
        .collect()
}

/// Runs an experiment and returns its `(summary, trace)` CSV text.
#[pyfunction]
fn run_csv(py: Python<'_>, config_json: &str) -> PyResult<(String, String)> {
    let exp = Experiment::from_json(config_json).map_err(value_err)?;
    let reports = py.detach(|| run_experiment(&exp)).map_err(value_err)?;
    Ok((summary_csv(&exp, &reports), trace_csv(&exp, &reports)))
}

/// Saturated backoff fixed point for `n` stations: `(tau, p)`.
#[pyfunction]
#[pyo3(signature = (n, w=32, m=6))]
fn bianchi(n: usize, w: u32, m: u32) -> PyResult<(f64, f64)> {
    let s = bianchi_fixed_point(n, w, m).map_err(value_err)?;
    Ok((s.tau, s.p))
}

/// Throughput-maximising initial window for `n` contenders.
#[pyfunction]
#[pyo3(signature = (n, m=6, rts=true))]
fn best_window(n: usize, m: u32, rts: bool) -> PyResult<u32> {
    let cost = if rts { CollisionCost::Rts } else { CollisionCost::Basic };
    optimize_window(n, &TimingParams::default(), m, cost).map_err(value_err)
}

/// Greedy proportional-fair primary channels for an efficiency matrix
/// (rows are APs) and per-AP average throughputs.
#[pyfunction]
#[pyo3(signature = (efficiency, avg_throughput, bandwidth_hz=20e6))]
fn allocate(efficiency: Vec<Vec<f64>>, avg_throughput: Vec<f64>, bandwidth_hz: f64) -> PyResult<Vec<usize>> {
    if efficiency.is_empty() || efficiency.len() != avg_throughput.len() {
        return Err(value_err("need one throughput per efficiency row"));
    }
    let width = efficiency[0].len();
    if width == 0 || efficiency.iter().any(|r| r.len() != width) {
        return Err(value_err("efficiency rows must be non-empty and equally long"));
    }
    let channel = ChannelModel::from_rows(&efficiency);
    let mut ledger = FairnessLedger::new(efficiency.len(), width);
    ledger.avg_throughput = avg_throughput;
    Ok(greedy_pf_allocate(&channel, &ledger, bandwidth_hz, 0).primary_channel)
}

/// A freshly initialised agent network.
#[pyclass]
struct QNetwork {
    params: QnnParams,
    ws: Workspace,
}

#[pymethods]
impl QNetwork {
    #[new]
    #[pyo3(signature = (seed=1))]
    fn new(seed: u64) -> Self {
        let params = QnnParams::dlca(&mut RngStream::new(seed).rng(Purpose::Init, Some(0)));
        Self {
            params,
            ws: Workspace::default(),
        }
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.params.n_params()
    }

    #[getter]
    fn input_width(&self) -> usize {
        STATE_WIDTH
    }

    /// `[Q(s, wait), Q(s, contend)]`.
    fn q_values(&mut self, state: Vec<f64>) -> PyResult<Vec<f64>> {
        if state.len() != STATE_WIDTH || state.iter().any(|v| !v.is_finite()) {
            return Err(value_err(format!("state must be {STATE_WIDTH} finite values")));
        }
        Ok(self.params.q_values(&state, &mut self.ws).to_vec())
    }
}

#[pymodule]
fn dlca_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_csv, m)?)?;
    m.add_function(wrap_pyfunction!(bianchi, m)?)?;
    m.add_function(wrap_pyfunction!(best_window, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_class::<QNetwork>()?;
    Ok(())
}
