//! Python bindings: traces, the score formula, the simulator, the selection
//! study and the experiment pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use advgen::env::{Interval, ParamRanges, Trace};
use advgen::experiment::{self, ExperimentConfig, DEFAULT_BENCH_BUDGETS};
use advgen::pls::GaussianStudy;
use advgen::score::{Direction, PerfSummary};
use advgen::sim::{self, CcKind, SimConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn experiment_err(e: experiment::ExperimentError) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn perf_dict<'py>(py: Python<'py>, p: &PerfSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("throughput_mbps", p.throughput_mbps)?;
    d.set_item("mean_delay_ms", p.mean_delay_ms)?;
    d.set_item("completion_time_ms", p.completion_time_ms)?;
    d.set_item("bytes_delivered", p.bytes_delivered)?;
    Ok(d)
}

/// A network trace: `(bandwidth_mbps, latency_ms, duration_ms)` intervals,
/// a buffer size in packets and an optional transfer size.
#[pyclass(name = "Trace", module = "advgen_py")]
struct PyTrace {
    inner: Trace,
}

#[pymethods]
impl PyTrace {
    #[new]
    #[pyo3(signature = (intervals, buffer_packets, data_kb=None))]
    fn new(intervals: Vec<(u32, u32, u32)>, buffer_packets: u32, data_kb: Option<u32>) -> PyResult<Self> {
        let ivs = intervals.into_iter().map(|(b, l, d)| Interval::new(b, l, d)).collect();
        let inner = Trace::new(ivs, buffer_packets, data_kb);
        inner.check().map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Parses the text trace format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = Trace::parse(text).map_err(value_err)?;
        inner.check().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let inner = Trace::read(&path).map_err(value_err)?;
        inner.check().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_file_string(&self) -> String {
        self.inner.to_file_string()
    }

    #[getter]
    fn intervals(&self) -> Vec<(u32, u32, u32)> {
        self.inner.intervals.iter().map(|i| (i.bandwidth_mbps, i.latency_ms, i.duration_ms)).collect()
    }

    #[getter]
    fn buffer_packets(&self) -> u32 {
        self.inner.buffer_packets
    }

    #[getter]
    fn data_kb(&self) -> Option<u32> {
        self.inner.data_kb
    }

    fn total_duration_ms(&self) -> u64 {
        self.inner.total_duration_ms()
    }

    fn mean_bandwidth_mbps(&self) -> f64 {
        self.inner.mean_bandwidth_mbps()
    }

    /// Checks the trace against the default parameter ranges.
    fn validate(&self) -> PyResult<()> {
        let bounds = advgen::env::Bounds::uniform(self.inner.intervals.len(), &ParamRanges::default()).map_err(value_err)?;
        advgen::env::validate(&self.inner, &bounds).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Trace({} intervals, buffer_packets={})", self.inner.intervals.len(), self.inner.buffer_packets)
    }
}

/// Relative gap between a reference and a target score.
#[pyfunction]
#[pyo3(signature = (reference, target, lower_is_better=false))]
fn eq1_score(reference: f64, target: f64, lower_is_better: bool) -> f64 {
    let d = if lower_is_better { Direction::LowerBetter } else { Direction::HigherBetter };
    advgen::score::eq1_score(reference, target, d)
}

/// Best achievable performance on the trace.
#[pyfunction]
fn capacity_oracle<'py>(py: Python<'py>, trace: PyRef<'_, PyTrace>) -> PyResult<Bound<'py, PyDict>> {
    perf_dict(py, &sim::capacity_oracle(&trace.inner))
}

fn parse_model(name: &str) -> PyResult<CcKind> {
    CcKind::MODELS
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown model `{name}`; expected reno, vegas or bbr_like")))
}

/// Simulates one or two flows over the trace; returns one dict per flow.
#[pyfunction]
#[pyo3(signature = (trace, models, seed=0, jitter_sigma_ms=0.0))]
fn simulate<'py>(
    py: Python<'py>,
    trace: PyRef<'_, PyTrace>,
    models: Vec<String>,
    seed: u64,
    jitter_sigma_ms: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let kinds = models.iter().map(|m| parse_model(m)).collect::<PyResult<Vec<_>>>()?;
    let cfg = SimConfig { jitter_sigma_ms, ..SimConfig::default() };
    let r = sim::simulate(&trace.inner, &kinds, seed, &cfg).map_err(value_err)?;
    r.flows
        .iter()
        .map(|f| {
            let d = perf_dict(py, &f.perf)?;
            d.set_item("model", f.model)?;
            d.set_item("retransmits", f.sender.retransmits)?;
            d.set_item("timeouts", f.sender.timeouts)?;
            Ok(d)
        })
        .collect()
}

/// Selection-algorithm study; returns `(budget, algorithm, mean, stderr)` rows.
#[pyfunction]
#[pyo3(signature = (budgets=None, trials=2000, sigma=20.0, arms=50, seed=0))]
fn bench_pls(budgets: Option<Vec<usize>>, trials: usize, sigma: f64, arms: usize, seed: u64) -> PyResult<Vec<(usize, String, f64, f64)>> {
    let budgets = budgets.unwrap_or_else(|| DEFAULT_BENCH_BUDGETS.to_vec());
    let study = GaussianStudy { arms, trials, sigma, seed };
    let rows = experiment::bench_pls(&budgets, &study).map_err(value_err)?;
    Ok(rows.into_iter().map(|r| (r.budget, r.algorithm, r.mean_true_score, r.stderr)).collect())
}

/// Runs the pipeline from a TOML config and returns the report as JSON text.
#[pyfunction]
#[pyo3(signature = (config_toml, output_dir=None))]
fn run_experiment(py: Python<'_>, config_toml: &str, output_dir: Option<PathBuf>) -> PyResult<String> {
    let mut cfg = ExperimentConfig::from_toml(config_toml).map_err(experiment_err)?;
    if let Some(o) = output_dir {
        cfg.output_dir = o;
    }
    let report = py.detach(|| experiment::run_experiment(&cfg)).map_err(experiment_err)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Reevaluates a saved trace under a config; returns `(mean, std_dev, scores)`.
#[pyfunction]
#[pyo3(signature = (trace_path, config_toml=None))]
fn replay(trace_path: PathBuf, config_toml: Option<&str>) -> PyResult<(f64, f64, Vec<f64>)> {
    let cfg = match config_toml {
        Some(t) => ExperimentConfig::from_toml(t).map_err(experiment_err)?,
        None => ExperimentConfig::default(),
    };
    let r = experiment::replay(&trace_path, &cfg, None).map_err(experiment_err)?;
    Ok((r.reevaluated.mean, r.reevaluated.std_dev, r.reevaluated.scores))
}

#[pymodule]
fn advgen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(eq1_score, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(bench_pls, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    Ok(())
}
