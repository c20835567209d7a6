//! Python bindings: the smoothing / adaptive forecasters, RMSE, grid
//! search, the SARIMA ground-truth generator, the trajectory simulator,
//! and the full experiment runner.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use linkcast_core::error::Error;
use linkcast_core::eval::{
    self, run_experiment, ExperimentConfig, GridAssignment, NnSettings, SplitFractions,
};
use linkcast_core::model::{ModelFamily, ModelSpec};
use linkcast_core::network::RoadNetwork;
use linkcast_core::sarima::{SarimaConfig, SarimaProcess};
use linkcast_core::series::parse_timestamp;
use linkcast_core::sim::{aggregate_observed_speeds, simulate_trajectories, SimScenario};

fn to_py(e: Error) -> PyErr {
    if e.exit_code() == 2 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// A parsed forecasting model, e.g. `Model("ASNT:alpha=0.5,gamma=0.1")`.
#[pyclass(name = "Model")]
struct PyModel {
    inner: ModelSpec,
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyModel { inner: ModelSpec::parse(spec).map_err(to_py)? })
    }

    /// Report row code (NSNT..MSMT, ADAPTIVE, NN, MLR).
    fn code(&self) -> String {
        self.inner.code()
    }

    /// Roll the model over a series; returns (first_bin, forecasts) where
    /// forecasts[i] targets 0-based bin first_bin + i. Smoothing and
    /// adaptive models only; the supervised models need training context.
    fn forecast(&self, values: Vec<f64>) -> PyResult<(usize, Vec<f64>)> {
        let track = eval::model_track(&self.inner, &values).map_err(to_py)?;
        Ok((track.first_bin, track.forecasts))
    }

    fn __repr__(&self) -> String {
        format!("Model({:?})", self.inner.code())
    }
}

/// Root-mean-square error between aligned forecasts and actuals.
#[pyfunction]
fn rmse(predicted: Vec<f64>, actual: Vec<f64>) -> PyResult<f64> {
    eval::rmse(&predicted, &actual).map_err(to_py)
}

/// Generate one link's clamped ground-truth series with the default
/// SARMA(1,0,1)(1,0,1)_24 generator (daily mean profile included unless
/// disabled). Identical (seed, link, length) inputs reproduce bit-identical
/// series.
#[pyfunction]
#[pyo3(signature = (seed, link, length, shock_sd=None, mean=None, daily_profile=true))]
fn generate_series(
    seed: u64,
    link: &str,
    length: usize,
    shock_sd: Option<f64>,
    mean: Option<f64>,
    daily_profile: bool,
) -> PyResult<Vec<f64>> {
    let mut cfg = SarimaConfig::default_with_seed(seed);
    if let Some(sd) = shock_sd {
        cfg.shock_sd = sd;
    }
    if let Some(m) = mean {
        cfg.mean = m;
    }
    if !daily_profile {
        cfg.seasonal_profile = None;
    }
    let process = SarimaProcess::new(cfg).map_err(to_py)?;
    let start = parse_timestamp("2024-01-01T00:00:00").map_err(to_py)?;
    Ok(process.generate(length, link, start, 60).map_err(to_py)?.values)
}

/// Simulate trajectories on the built-in 4x4 grid over default ground
/// truth and return the per-link observed speed series.
#[pyfunction]
#[pyo3(signature = (seed, target_average, bins, speed_sd=10.0))]
fn simulate_observed(
    py: Python<'_>,
    seed: u64,
    target_average: f64,
    bins: usize,
    speed_sd: f64,
) -> PyResult<Py<PyDict>> {
    let network = RoadNetwork::grid4x4();
    let process = SarimaProcess::new(SarimaConfig::default_with_seed(seed)).map_err(to_py)?;
    let start = parse_timestamp("2024-01-01T00:00:00").map_err(to_py)?;
    let gt: Vec<_> = network
        .links()
        .iter()
        .map(|l| process.generate(bins, &l.id, start, 60))
        .collect::<Result<_, _>>()
        .map_err(to_py)?;
    let scenario = SimScenario {
        network: &network,
        ground_truth: &gt,
        target_average,
        speed_sd,
        bins,
        seed,
    };
    let log = simulate_trajectories(&scenario).map_err(to_py)?;
    let observed = aggregate_observed_speeds(&log, &network, bins).map_err(to_py)?;
    let dict = PyDict::new(py);
    for (idx, series) in observed.included() {
        dict.set_item(network.links()[idx].id.clone(), series.values.clone())?;
    }
    Ok(dict.into())
}

fn assignment_dict(py: Python<'_>, a: &GridAssignment) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("alpha", a.alpha)?;
    d.set_item("beta", a.beta)?;
    d.set_item("gamma", a.gamma)?;
    Ok(d.into())
}

/// Exhaustive validation-RMSE grid search for one family over a single
/// series split at `train_end`/`val_end`. Returns a dict with the winning
/// assignment, its RMSE, and the full table size.
#[pyfunction]
#[pyo3(signature = (values, family, train_end, val_end, season_len=24, horizon=1))]
fn grid_search(
    py: Python<'_>,
    values: Vec<f64>,
    family: &str,
    train_end: usize,
    val_end: usize,
    season_len: usize,
    horizon: usize,
) -> PyResult<Py<PyDict>> {
    if train_end == 0 || val_end <= train_end || val_end > values.len() {
        return Err(PyValueError::new_err("need 0 < train_end < val_end <= len(values)"));
    }
    let family = ModelFamily::parse(family).map_err(to_py)?;
    let result = eval::grid_search(
        &family,
        &values[..train_end],
        &values[train_end..val_end],
        season_len,
        horizon,
    )
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("family", result.family.clone())?;
    d.set_item("best", assignment_dict(py, &result.best)?)?;
    d.set_item("best_rmse", result.best_rmse)?;
    d.set_item("table_size", result.table.len())?;
    Ok(d.into())
}

/// Run the full multi-scenario experiment on the built-in 4x4 grid with
/// the default generator and return the report as nested dicts. Arguments
/// shrink the desk-scale defaults (90 days, three densities, eleven rows).
#[pyfunction]
#[pyo3(signature = (seeds, bins=2160, scenarios=None, models=None, nn_epochs=200))]
fn run_benchmark(
    py: Python<'_>,
    seeds: Vec<u64>,
    bins: usize,
    scenarios: Option<Vec<f64>>,
    models: Option<Vec<String>>,
    nn_epochs: usize,
) -> PyResult<Py<PyDict>> {
    let mut cfg = ExperimentConfig::default_with_seeds(seeds);
    cfg.bins = bins;
    if let Some(s) = scenarios {
        cfg.scenarios = s;
    }
    if let Some(m) = models {
        cfg.models = m;
    }
    cfg.nn = NnSettings { epochs: nn_epochs, ..NnSettings::default() };
    cfg.split = SplitFractions::default();
    let report = run_experiment(&cfg).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("models", report.model_codes.clone())?;
    d.set_item("scenarios", report.scenario_targets.clone())?;
    d.set_item("mean_rmse", report.mean_rmse())?;
    d.set_item("config_hash", report.config_hash.clone())?;
    let per_seed = PyDict::new(py);
    for sr in &report.seed_reports {
        let entry = PyDict::new(py);
        entry.set_item("rmse", sr.rmse.clone())?;
        let best = PyDict::new(py);
        for b in &sr.best_params {
            let row = assignment_dict(py, &b.assignment)?;
            row.bind(py).set_item("val_rmse", b.val_rmse)?;
            best.set_item(b.family.clone(), row)?;
        }
        entry.set_item("best_params", best)?;
        per_seed.set_item(sr.seed, entry)?;
    }
    d.set_item("per_seed", per_seed)?;
    Ok(d.into())
}

#[pymodule]
fn linkcast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(generate_series, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_observed, m)?)?;
    m.add_function(wrap_pyfunction!(grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    Ok(())
}
