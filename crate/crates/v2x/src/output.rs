//! Result files. Floats are written in shortest round-trip form, so equal
//! runs give byte-identical files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use v2x_core::rho::RunLedger;

use crate::error::{CliError, Result};
use crate::traces::schema;

pub const LEDGER_HEADER: [&str; 21] = [
    "prosumer_id",
    "slot",
    "p_grid",
    "p_renew",
    "p_buy",
    "p_sell",
    "p_evc",
    "p_evd",
    "p_v2h",
    "p_v2g",
    "p_as",
    "soc",
    "x_discharge",
    "y_sell",
    "cost_grid",
    "cost_battery",
    "cost_buy",
    "revenue_sell",
    "revenue_v2g",
    "penalty",
    "total",
];

pub fn create_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path).map_err(CliError::io(path))?;
    Ok(path.to_path_buf())
}

pub fn write_ledger(path: &Path, ledger: &RunLedger) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| schema(path, e))?;
    w.write_record(LEDGER_HEADER).map_err(|e| schema(path, e))?;
    for (u, (row, costs)) in ledger.decisions.iter().zip(&ledger.costs).enumerate() {
        for (t, (d, c)) in row.iter().zip(costs).enumerate() {
            let flags = [d.x_discharge as u8, d.y_sell as u8];
            let mut rec = vec![u.to_string(), t.to_string()];
            rec.extend(
                [d.p_grid, d.p_renew, d.p_buy, d.p_sell, d.p_evc, d.p_evd, d.p_v2h, d.p_v2g, d.p_as, d.soc]
                    .iter()
                    .map(f64::to_string),
            );
            rec.extend(flags.iter().map(u8::to_string));
            rec.extend(
                [c.grid, c.battery, c.buy, c.sell, c.v2g, c.penalty, c.total()]
                    .iter()
                    .map(f64::to_string),
            );
            w.write_record(&rec).map_err(|e| schema(path, e))?;
        }
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}

/// Write rows of displayable cells under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| schema(path, e))?;
    w.write_record(header).map_err(|e| schema(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| schema(path, e))?;
    }
    w.flush().map_err(CliError::io(path))
}
