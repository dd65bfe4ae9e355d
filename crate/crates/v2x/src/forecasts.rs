//! Precomputed forecasts, header
//! `day,prosumer_id,origin_slot,target_slot,load_kw,pv_kw`. A row is the
//! prediction made at `origin_slot` for `target_slot` of the given day.

use std::path::Path;

use serde::Deserialize;
use v2x_core::forecast::{ForecastSeries, ForecastTable};

use crate::error::{CliError, Result};
use crate::output::write_table;
use crate::traces::{check_header, reader, schema};

const HEADER: [&str; 6] = ["day", "prosumer_id", "origin_slot", "target_slot", "load_kw", "pv_kw"];

#[derive(Debug, Deserialize)]
struct Row {
    day: usize,
    prosumer_id: usize,
    origin_slot: usize,
    target_slot: usize,
    load_kw: f64,
    pv_kw: f64,
}

pub fn read_forecasts(path: &Path) -> Result<ForecastTable> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| schema(path, e))?.clone();
    check_header(path, &headers, &HEADER)?;
    let mut table = ForecastTable::default();
    for rec in rdr.deserialize::<Row>() {
        let r = rec.map_err(|e| schema(path, e))?;
        if !(r.load_kw.is_finite() && r.pv_kw.is_finite()) {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                message: format!("non-finite forecast for prosumer {} target {}", r.prosumer_id, r.target_slot),
            });
        }
        if r.load_kw < 0.0 || r.pv_kw < 0.0 {
            return Err(CliError::Negative {
                path: path.to_path_buf(),
                at: format!("day {} prosumer {} origin {} target {}", r.day, r.prosumer_id, r.origin_slot, r.target_slot),
                value: r.load_kw.min(r.pv_kw),
            });
        }
        if r.target_slot <= r.origin_slot {
            return Err(CliError::OutOfRange {
                path: path.to_path_buf(),
                message: format!("target {} must come after origin {}", r.target_slot, r.origin_slot),
            });
        }
        let key = (r.day, r.prosumer_id, r.origin_slot, r.target_slot);
        if table.entries.contains_key(&key) {
            return Err(CliError::Duplicate {
                path: path.to_path_buf(),
                at: format!("day {} prosumer {} origin {} target {}", r.day, r.prosumer_id, r.origin_slot, r.target_slot),
            });
        }
        table.insert(r.day, r.prosumer_id, r.origin_slot, r.target_slot, r.load_kw, r.pv_kw);
    }
    Ok(table)
}

/// Write the forecasts made during day `day` in the format
/// [`read_forecasts`] accepts.
pub fn write_forecasts(path: &Path, day: usize, series: &[ForecastSeries]) -> Result<()> {
    let mut rows = Vec::new();
    for f in series {
        for u in 0..f.load.len() {
            for k in 0..f.horizon {
                rows.push(vec![
                    day.to_string(),
                    u.to_string(),
                    f.origin.to_string(),
                    f.target_slot(k).to_string(),
                    f.load[u][k].to_string(),
                    f.pv[u][k].to_string(),
                ]);
            }
        }
    }
    write_table(path, &HEADER, &rows)
}
