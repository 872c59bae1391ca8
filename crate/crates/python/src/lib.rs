//! Python bindings: configuration, scenario queries, channel-model helpers,
//! metric functions and full planning runs. Structured results cross the
//! boundary as JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ssbplan_core::channel::{self, LinkGeometry};
use ssbplan_core::config::Config;
use ssbplan_core::ega::EgaParams;
use ssbplan_core::evaluation;
use ssbplan_core::pipeline::{self, Codebooks, RunSummary};
use ssbplan_core::scenario::{Scenario, UserKind};

fn py_err(e: ssbplan_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load(config_json: Option<&str>, seed: Option<u64>) -> PyResult<Config> {
    let mut cfg = match config_json {
        Some(text) => Config::from_json(text).map_err(py_err)?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.seeds.optimizer = s;
    }
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

fn kind(aerial: bool) -> UserKind {
    if aerial {
        UserKind::Aerial
    } else {
        UserKind::Ground
    }
}

/// Default configuration as pretty-printed JSON.
#[pyfunction]
fn default_config() -> String {
    Config::default().to_json_pretty()
}

/// Parse and validate a configuration; raises ValueError on failure.
#[pyfunction]
fn validate_config(config_json: &str) -> PyResult<()> {
    load(Some(config_json), None).map(|_| ())
}

/// Deployment sizes for a configuration (default when omitted).
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn scenario_info<'py>(py: Python<'py>, config_json: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(config_json, None)?;
    let scenario = Scenario::build(&cfg).map_err(py_err)?;
    let books = Codebooks::build(&scenario);
    let d = PyDict::new(py);
    d.set_item("sectors", scenario.sectors.len())?;
    d.set_item("antennas", scenario.sectors[0].panel.n_elements())?;
    d.set_item("highway_points", scenario.highway.n_points())?;
    d.set_item("highway_segments", scenario.highway.n_segments())?;
    d.set_item("ssb_codewords", books.ssb.len())?;
    d.set_item("dl_codewords", books.dl.len())?;
    Ok(d)
}

/// Path loss in dB and whether the geometry lies in the model's validity range.
#[pyfunction]
#[pyo3(signature = (d2d_m, h_bs_m, h_ut_m, aerial, los, fc_hz=3.5e9))]
fn path_loss_db(d2d_m: f64, h_bs_m: f64, h_ut_m: f64, aerial: bool, los: bool, fc_hz: f64) -> (f64, bool) {
    let pl = channel::path_loss(&LinkGeometry { d2d_m, h_bs_m, h_ut_m }, kind(aerial), los, fc_hz);
    (pl.loss_db, pl.in_range)
}

#[pyfunction]
fn los_probability(d2d_m: f64, h_bs_m: f64, h_ut_m: f64, aerial: bool) -> f64 {
    channel::los_probability(&LinkGeometry { d2d_m, h_bs_m, h_ut_m }, kind(aerial))
}

/// Antenna element gain in dBi; angles in radians.
#[pyfunction]
fn element_gain_db(azimuth_rad: f64, zenith_rad: f64) -> f64 {
    channel::element_gain_db(azimuth_rad, zenith_rad)
}

/// Rate in bit/s for a linear SINR with `n_w` users sharing the band.
#[pyfunction]
fn achievable_rate(sinr_linear: f64, n_w: usize) -> f64 {
    evaluation::achievable_rate(sinr_linear, n_w, &Config::default().radio)
}

/// Lower-order-statistic percentile, `q` in [0, 1].
#[pyfunction]
fn percentile(samples: Vec<f64>, q: f64) -> PyResult<f64> {
    evaluation::percentile(&samples, q).map_err(py_err)
}

/// Plan and evaluate baseline and optimized beams; returns the summary as JSON.
#[pyfunction]
#[pyo3(signature = (config_json=None, seed=None))]
fn run_experiment(py: Python<'_>, config_json: Option<&str>, seed: Option<u64>) -> PyResult<String> {
    let cfg = load(config_json, seed)?;
    py.detach(|| -> ssbplan_core::Result<String> {
        let scenario = Scenario::build(&cfg)?;
        let books = Codebooks::build(&scenario);
        let params = EgaParams::from_config(&cfg.ega, cfg.seeds.optimizer);
        let outcome = pipeline::plan(&scenario, &books, &params)?;
        let snapshots = cfg.evaluation.snapshots;
        let result = pipeline::evaluate(&scenario, &books, outcome.plans(), snapshots)?;
        serde_json::to_string(&RunSummary::new(&outcome, &result, snapshots)).map_err(|e| ssbplan_core::Error::Format(e.to_string()))
    })
    .map_err(py_err)
}

#[pymodule]
fn ssbplan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_info, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(los_probability, m)?)?;
    m.add_function(wrap_pyfunction!(element_gain_db, m)?)?;
    m.add_function(wrap_pyfunction!(achievable_rate, m)?)?;
    m.add_function(wrap_pyfunction!(percentile, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
