use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mwlil::{Chain, ChainSpec};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::Tolerances;
use crate::error::{CliError, CliResult};

pub fn read_spec(path: &Path) -> CliResult<ChainSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    Ok(ChainSpec::from_json(&text)?)
}

pub fn load(path: &Path) -> CliResult<Chain> {
    Ok(mwlil::load_chain(&read_spec(path)?)?)
}

pub fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))
}

/// Writes a CSV table whose cells are already formatted.
pub fn write_csv(path: PathBuf, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn columns(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |c| format!("{prefix}_{c}"))
}

pub fn header(fixed: &[&str], extra: impl IntoIterator<Item = String>) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).chain(extra).collect()
}

pub fn cell(v: f64) -> String {
    v.to_string()
}

pub fn row_cells(m: &DMatrix<f64>, i: usize) -> impl Iterator<Item = String> + '_ {
    (0..m.ncols()).map(move |c| cell(m[(i, c)]))
}

pub fn nested(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn chain_info(chain: &Chain) -> Value {
    json!({
        "states": chain.kernel.states(),
        "d": chain.dim(),
        "stationary": chain.stationary.as_slice(),
        "centering_shift": chain.centering_shift,
    })
}

/// Tolerances that are part of the validation contract and not overridable.
fn fixed_tolerances() -> Value {
    json!({
        "row_sum": mwlil::chain::ROW_SUM_TOL,
        "stationary": mwlil::chain::STATIONARY_TOL,
        "centering": mwlil::chain::CENTERING_TOL,
        "resolvent_residual": mwlil::poisson::RESOLVENT_TOL,
        "psd_floor": mwlil::diffusion::PSD_FLOOR,
        "diffusion_batches": mwlil::diffusion::BATCHES,
        "diffusion_min_steps": mwlil::diffusion::MIN_STEPS,
    })
}

/// Writes report.json. The timestamp is the only run-dependent field.
pub fn write_report(
    dir: &Path,
    command: &str,
    config: &impl Serialize,
    tol: &Tolerances,
    chain: Option<Value>,
    results: Value,
) -> CliResult<()> {
    let mut config = serde_json::to_value(config)?;
    if let Value::Object(map) = &mut config {
        map.remove("tol");
        map.insert("command".into(), Value::String(command.into()));
    }
    let generated = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let report = json!({
        "metadata": {
            "tool": "mwlil",
            "version": env!("CARGO_PKG_VERSION"),
            "generated_unix": generated,
        },
        "config": config,
        "tolerances": { "effective": tol, "fixed": fixed_tolerances() },
        "chain": chain,
        "results": results,
    });
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(dir.join("report.json"), text + "\n")?;
    Ok(())
}
