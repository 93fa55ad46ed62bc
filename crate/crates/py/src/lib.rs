use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use relaysim_core::channel::{pathloss_d2d, pathloss_wan};
use relaysim_core::config::CONFIG_KEYS;
use relaysim_core::engine::{self, EnbComponent, RunOutput};
use relaysim_core::power::PowerConfig;
use relaysim_core::relaying::Direction;
use relaysim_core::stats::{percentile_sorted, sorted};
use relaysim_core::{Mode, ScenarioConfig, SimError};

fn py_err(e: SimError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Macro pathloss in dB at `d` meters.
#[pyfunction(name = "pathloss_wan")]
fn py_pathloss_wan(d: f64) -> f64 {
    pathloss_wan(d)
}

/// UE-to-UE pathloss in dB at `d` meters.
#[pyfunction(name = "pathloss_d2d")]
fn py_pathloss_d2d(d: f64) -> f64 {
    pathloss_d2d(d)
}

/// Open-loop uplink power in dBm for pathloss `pl_db` over `rbs` resource blocks.
#[pyfunction]
#[pyo3(signature = (pl_db, rbs = 50))]
fn ul_tx_power(pl_db: f64, rbs: u32) -> f64 {
    PowerConfig::default().ul_tx_power(pl_db, rbs)
}

/// The default configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    ScenarioConfig::default().resolved().to_toml_string()
}

#[pyfunction]
fn config_keys() -> Vec<&'static str> {
    CONFIG_KEYS.to_vec()
}

fn percentiles(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (percentile_sorted(v, 0.05), percentile_sorted(v, 0.5))
    }
}

/// Runs one scenario and returns its headline statistics as a dict.
///
/// `config` is TOML text applied over the defaults; `mode`, `seed` and
/// `drops` override it.
#[pyfunction]
#[pyo3(signature = (mode = "relay", seed = 1, drops = 1, config = None, full_scale = false, threads = 0))]
fn run<'py>(
    py: Python<'py>,
    mode: &str,
    seed: u64,
    drops: usize,
    config: Option<&str>,
    full_scale: bool,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let mode: Mode = mode.parse().map_err(PyValueError::new_err)?;
    let mut cfg = ScenarioConfig::default();
    if full_scale {
        cfg = cfg.full_scale();
    }
    if let Some(text) = config {
        cfg.apply_toml_str(text).map_err(py_err)?;
    }
    let mut cfg = cfg.with_mode(mode);
    cfg.run.seed = seed;
    cfg.run.drops = drops;

    let out = py.detach(|| engine::run(&cfg, threads, false)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("mode", mode.as_str())?;
    d.set_item("seed", seed)?;
    d.set_item("drops", drops)?;
    match out {
        RunOutput::System(run) => {
            let m = &run.metrics;
            for (name, dir) in [("dl", Direction::Dl), ("ul", Direction::Ul)] {
                let rates = m.ue_rate_bps(dir);
                let (p5, p50) = percentiles(&rates);
                d.set_item(format!("{name}_rate_bps"), rates)?;
                d.set_item(format!("{name}_rate_p5_bps"), p5)?;
                d.set_item(format!("{name}_rate_p50_bps"), p50)?;
                d.set_item(format!("{name}_sinr_db"), m.ue_sinr_db(dir))?;
                d.set_item(format!("{name}_access_sinr_db"), m.access_sinr_db(dir))?;
                d.set_item(format!("{name}_relayed_fraction"), m.relayed_fraction(dir))?;
            }
            for c in EnbComponent::ALL {
                d.set_item(format!("enb_{}_dbm", c.as_str()), m.enb_component_dbm(c))?;
            }
            d.set_item("mean_active_links", m.mean_active_links())?;
            d.set_item("max_sinr_db", m.max_sinr_db)?;
        }
        RunOutput::UpperBound(ub) => {
            d.set_item("median_dl_gain_db", ub.median_dl_gain_db())?;
            d.set_item("median_ul_gain_db", ub.median_ul_gain_db())?;
            d.set_item("dl_before_db", sorted(&ub.dl_before_db))?;
            d.set_item("dl_after_db", sorted(&ub.dl_after_db))?;
            d.set_item("ul_before_db", sorted(&ub.ul_before_db))?;
            d.set_item("ul_after_db", sorted(&ub.ul_after_db))?;
            d.set_item("replaced", ub.replaced)?;
            d.set_item("active", ub.active)?;
        }
        RunOutput::Snapshot(s) => {
            let n = s.nearest_distance_m.len().max(1) as f64;
            d.set_item("mean_nearest_distance_m", s.nearest_distance_m.iter().sum::<f64>() / n)?;
            let power = sorted(&s.ref_power_dbm);
            let p80 = if power.is_empty() { f64::NAN } else { percentile_sorted(&power, 0.8) };
            d.set_item("ref_power_p80_dbm", p80)?;
            d.set_item("nearest_distance_m", s.nearest_distance_m)?;
            d.set_item("ref_power_dbm", power)?;
        }
    }
    Ok(d)
}

#[pymodule]
fn relaysim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(py_pathloss_wan, m)?)?;
    m.add_function(wrap_pyfunction!(py_pathloss_d2d, m)?)?;
    m.add_function(wrap_pyfunction!(ul_tx_power, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(config_keys, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
