use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use vortexlab::commands::{execute, Command};
use vortexlab::config::RunConfig;
use vortexlab::io::{parse_trajectory_csv, VERSION};
use vortexlab::snapshot::Snapshot;
use vortexlab::Error;

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.name());
    match e {
        Error::ConfigError { .. } => PyValueError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn command(name: &str) -> PyResult<Command> {
    Command::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown command `{name}`")))
}

/// Validate a JSON run configuration and return its hash.
#[pyfunction]
fn config_hash(config_json: &str) -> PyResult<String> {
    Ok(RunConfig::from_json(config_json).map_err(to_py)?.hash())
}

/// Run a command on a configuration file; returns the outcome as JSON.
#[pyfunction]
#[pyo3(signature = (command_name, config_path, out=None))]
fn run(
    py: Python<'_>,
    command_name: &str,
    config_path: &str,
    out: Option<&str>,
) -> PyResult<String> {
    let cmd = command(command_name)?;
    let config = RunConfig::load(config_path).map_err(to_py)?;
    let outcome = py
        .detach(|| execute(cmd, &config, out.map(Path::new)))
        .map_err(to_py)?;
    serde_json::to_string(&outcome).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Integrate the point-vortex law of a JSON configuration. Returns
/// `(t_star, stop_reason, rows)` with rows `(id, degree, t, x, y)`.
#[pyfunction]
fn integrate_law(
    py: Python<'_>,
    config_json: &str,
) -> PyResult<(f64, String, Vec<(usize, i32, f64, f64, f64)>)> {
    let config = RunConfig::from_json(config_json).map_err(to_py)?;
    let sol = py
        .detach(|| config.pde_case(None)?.integrate_law(config.law_dt()?))
        .map_err(to_py)?;
    let rows = sol
        .trajectories()
        .iter()
        .flat_map(|tr| {
            tr.samples
                .iter()
                .map(|&(t, p)| (tr.id, tr.degree, t, p[0], p[1]))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok((sol.t_star, sol.stop_reason.as_str().to_string(), rows))
}

/// Parse trajectory CSV text into `(id, degree, t, x, y)` rows.
#[pyfunction]
fn read_trajectories(text: &str) -> PyResult<Vec<(usize, i32, f64, f64, f64)>> {
    let rows = parse_trajectory_csv(text).map_err(to_py)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.id, r.degree, r.t, r.x, r.y))
        .collect())
}

/// Load a VXF1 snapshot as `(kind, nx, ny, lx, ly, values)`. Vector fields
/// list all `x` components then all `y`; complex fields interleave `re, im`.
#[pyfunction]
fn load_snapshot(path: &str) -> PyResult<(String, usize, usize, f64, f64, Vec<f64>)> {
    let s = Snapshot::load(path).map_err(to_py)?;
    let g = *s.grid();
    let (kind, values) = match s {
        Snapshot::Scalar(f) => ("scalar", f.into_vec()),
        Snapshot::Vector(v) => ("vector", v.xs().iter().chain(v.ys()).copied().collect()),
        Snapshot::Complex(c) => (
            "complex",
            c.data().iter().flat_map(|z| [z.re, z.im]).collect(),
        ),
    };
    Ok((kind.to_string(), g.nx(), g.ny(), g.lx(), g.ly(), values))
}

#[pymodule]
#[pyo3(name = "vortexlab")]
fn vortexlab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", VERSION)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_law, m)?)?;
    m.add_function(wrap_pyfunction!(read_trajectories, m)?)?;
    m.add_function(wrap_pyfunction!(load_snapshot, m)?)?;
    Ok(())
}
