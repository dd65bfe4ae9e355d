//! Market price series, header
//! `slot,v2g_price,reserve_price,feed_in,retail_reference`, one row per slot.
//! The series applies to every day. Local trading prices are recomputed as
//! the midpoint of `retail_reference` and `feed_in`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use v2x_core::scenario::Scenario;
use v2x_core::streams::mid_market_rate;

use crate::error::{CliError, Result};
use crate::traces::{check_header, reader, schema};

const HEADER: [&str; 5] = ["slot", "v2g_price", "reserve_price", "feed_in", "retail_reference"];

#[derive(Debug, Clone, Copy, Deserialize)]
struct Row {
    slot: usize,
    v2g_price: f64,
    reserve_price: f64,
    feed_in: f64,
    retail_reference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub path: PathBuf,
    pub v2g_price: Vec<f64>,
    pub reserve_price: Vec<f64>,
    pub feed_in: Vec<f64>,
    pub retail_reference: Vec<f64>,
}

pub fn read_prices(path: &Path, slots: usize) -> Result<PriceSeries> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| schema(path, e))?.clone();
    check_header(path, &headers, &HEADER)?;
    let mut rows: Vec<Option<Row>> = vec![None; slots];
    for rec in rdr.deserialize::<Row>() {
        let r = rec.map_err(|e| schema(path, e))?;
        let values = [r.v2g_price, r.reserve_price, r.feed_in, r.retail_reference];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                message: format!("non-finite price in slot {}", r.slot),
            });
        }
        if let Some(&v) = values.iter().find(|v| **v < 0.0) {
            return Err(CliError::Negative {
                path: path.to_path_buf(),
                at: format!("slot {}", r.slot),
                value: v,
            });
        }
        let cell = rows.get_mut(r.slot).ok_or_else(|| CliError::OutOfRange {
            path: path.to_path_buf(),
            message: format!("slot {} is outside a {slots}-slot day", r.slot),
        })?;
        if cell.is_some() {
            return Err(CliError::Duplicate {
                path: path.to_path_buf(),
                at: format!("slot {}", r.slot),
            });
        }
        *cell = Some(r);
    }
    if let Some(slot) = rows.iter().position(Option::is_none) {
        return Err(CliError::Gap {
            path: path.to_path_buf(),
            at: format!("slot {slot}"),
        });
    }
    let rows: Vec<Row> = rows.into_iter().flatten().collect();
    Ok(PriceSeries {
        path: path.to_path_buf(),
        v2g_price: rows.iter().map(|r| r.v2g_price).collect(),
        reserve_price: rows.iter().map(|r| r.reserve_price).collect(),
        feed_in: rows.iter().map(|r| r.feed_in).collect(),
        retail_reference: rows.iter().map(|r| r.retail_reference).collect(),
    })
}

/// Replace the synthetic prices of every day.
pub fn apply_prices(scenario: &mut Scenario, series: &PriceSeries) -> Result<()> {
    let local = series
        .retail_reference
        .iter()
        .zip(&series.feed_in)
        .map(|(&r, &f)| mid_market_rate(r, f).map(|(buy, _)| buy))
        .collect::<v2x_core::Result<Vec<f64>>>()?;
    for day in &mut scenario.days {
        if day.slots() != series.v2g_price.len() {
            return Err(CliError::OutOfRange {
                path: series.path.clone(),
                message: format!("prices cover {} slots, the day has {}", series.v2g_price.len(), day.slots()),
            });
        }
        let n = day.prosumers.len();
        day.prices.v2g_price.clone_from(&series.v2g_price);
        day.prices.reserve_price.clone_from(&series.reserve_price);
        day.prices.local_buy = vec![local.clone(); n];
        day.prices.local_sell = vec![local.clone(); n];
        day.validate()?;
    }
    Ok(())
}
