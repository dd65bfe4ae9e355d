//! Load and PV traces from CSV.
//!
//! Files have the header `prosumer_id,day,slot,kw`. Day 0 is the first
//! simulated day; negative days address the warm-up history, `-1` being the
//! day before day 0. Every `(prosumer, day)` that appears must list all
//! slots. Prosumers or days that do not appear keep their synthetic traces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use v2x_core::scenario::Scenario;

use crate::error::{at, CliError, Result};

const HEADER: [&str; 4] = ["prosumer_id", "day", "slot", "kw"];

#[derive(Debug, Deserialize)]
struct Row {
    prosumer_id: usize,
    day: i64,
    slot: usize,
    kw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub path: PathBuf,
    pub slots: usize,
    /// Complete series keyed by `(prosumer, day)`.
    pub series: BTreeMap<(usize, i64), Vec<f64>>,
}

pub(crate) fn check_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            message: format!("header must be `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

pub(crate) fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

pub(crate) fn schema(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| format!("line {}: ", p.line())).unwrap_or_default();
    CliError::Schema {
        path: path.to_path_buf(),
        message: format!("{line}{e}"),
    }
}

/// Read a trace file for a day of `slots` slots.
pub fn read_traces(path: &Path, slots: usize) -> Result<TraceTable> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| schema(path, e))?.clone();
    check_header(path, &headers, &HEADER)?;
    let mut partial: BTreeMap<(usize, i64), Vec<Option<f64>>> = BTreeMap::new();
    for rec in rdr.deserialize::<Row>() {
        let r = rec.map_err(|e| schema(path, e))?;
        if !r.kw.is_finite() {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                message: format!("non-finite kw for prosumer {} day {} slot {}", r.prosumer_id, r.day, r.slot),
            });
        }
        if r.kw < 0.0 {
            return Err(CliError::Negative {
                path: path.to_path_buf(),
                at: at(r.prosumer_id, r.day, r.slot),
                value: r.kw,
            });
        }
        if r.slot >= slots {
            return Err(CliError::OutOfRange {
                path: path.to_path_buf(),
                message: format!("slot {} is outside a {slots}-slot day", r.slot),
            });
        }
        let cell = &mut partial.entry((r.prosumer_id, r.day)).or_insert_with(|| vec![None; slots])[r.slot];
        if cell.is_some() {
            return Err(CliError::Duplicate {
                path: path.to_path_buf(),
                at: at(r.prosumer_id, r.day, r.slot),
            });
        }
        *cell = Some(r.kw);
    }
    let mut series = BTreeMap::new();
    for ((u, d), cells) in partial {
        if let Some(slot) = cells.iter().position(Option::is_none) {
            return Err(CliError::Gap {
                path: path.to_path_buf(),
                at: at(u, d, slot),
            });
        }
        series.insert((u, d), cells.into_iter().flatten().collect());
    }
    Ok(TraceTable {
        path: path.to_path_buf(),
        slots,
        series,
    })
}

/// Write traces in the format [`read_traces`] accepts.
pub fn write_traces(path: &Path, series: &BTreeMap<(usize, i64), Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| schema(path, e))?;
    w.write_record(HEADER).map_err(|e| schema(path, e))?;
    for (&(u, d), values) in series {
        for (t, v) in values.iter().enumerate() {
            w.write_record([u.to_string(), d.to_string(), t.to_string(), v.to_string()])
                .map_err(|e| schema(path, e))?;
        }
    }
    w.flush().map_err(CliError::io(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Load,
    Pv,
}

/// Replace synthetic traces with the ones in `table`.
pub fn apply_traces(scenario: &mut Scenario, table: &TraceTable, which: Series) -> Result<()> {
    let n = scenario.num_prosumers();
    let hist = scenario.history.len() as i64;
    let days = scenario.days.len() as i64;
    let h = scenario.days.first().map_or(0, |d| d.slots());
    if table.slots != h {
        return Err(CliError::OutOfRange {
            path: table.path.clone(),
            message: format!("traces have {} slots per day, scenario has {h}", table.slots),
        });
    }
    for (&(u, d), values) in &table.series {
        if u >= n {
            return Err(CliError::OutOfRange {
                path: table.path.clone(),
                message: format!("prosumer {u} does not exist, the fleet has {n}"),
            });
        }
        if d < -hist || d >= days {
            return Err(CliError::OutOfRange {
                path: table.path.clone(),
                message: format!("day {d} is outside the scenario ({hist} history days, {days} days)"),
            });
        }
        if d >= 0 {
            let p = &mut scenario.days[d as usize].prosumers[u];
            match which {
                Series::Load => p.load_trace.clone_from(values),
                Series::Pv => p.pv_cap_trace.clone_from(values),
            }
        } else {
            let past = &mut scenario.history[(hist + d) as usize];
            match which {
                Series::Load => past.load[u].clone_from(values),
                Series::Pv => past.pv[u].clone_from(values),
            }
        }
    }
    for day in &scenario.days {
        day.validate()?;
    }
    Ok(())
}
