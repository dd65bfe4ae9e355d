//! File formats, scenario loading and the command-line runner for
//! `v2x-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod forecasts;
pub mod output;
pub mod prices;
pub mod topology;
pub mod traces;

use v2x_core::forecast::{ForecastTable, Forecaster, ForecasterSpec};
use v2x_core::scenario::{materialize, materialize_on, Scenario};

use config::Experiment;
use error::Result;

/// Where a run's forecasts come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastSource {
    Model(ForecasterSpec),
    Table(ForecastTable),
}

impl ForecastSource {
    pub fn forecaster(&self) -> &(dyn Forecaster + Sync) {
        match self {
            ForecastSource::Model(spec) => spec,
            ForecastSource::Table(table) => table,
        }
    }
}

/// A materialized experiment, ready to solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub scenario: Scenario,
    pub forecasts: ForecastSource,
}

impl Loaded {
    /// Fail early when the forecaster reads more history than was generated.
    pub fn require_history(&self) -> Result<()> {
        let needed = self.forecasts.forecaster().history_needed();
        let available = self.scenario.history.len();
        if needed > available {
            return Err(v2x_core::Error::InsufficientHistory { needed, available }.into());
        }
        Ok(())
    }
}

/// Materialize the scenario of `exp` and apply its data files.
pub fn load(exp: &Experiment) -> Result<Loaded> {
    let cfg = &exp.scenario;
    let mut scenario = match &exp.data.topology {
        Some(path) => {
            let feeder = topology::read_feeder(path, exp.data.base_mva, exp.data.base_kv)?.build(cfg.slots_per_day)?;
            materialize_on(cfg, feeder.topology, &feeder.base_p, &feeder.base_q)?
        }
        None => materialize(cfg)?,
    };
    let h = cfg.slots_per_day;
    if let Some(path) = &exp.data.load {
        traces::apply_traces(&mut scenario, &traces::read_traces(path, h)?, traces::Series::Load)?;
    }
    if let Some(path) = &exp.data.pv {
        traces::apply_traces(&mut scenario, &traces::read_traces(path, h)?, traces::Series::Pv)?;
    }
    if let Some(path) = &exp.data.prices {
        prices::apply_prices(&mut scenario, &prices::read_prices(path, h)?)?;
    }
    let forecasts = match &exp.data.forecasts {
        Some(path) => ForecastSource::Table(forecasts::read_forecasts(path)?),
        None => ForecastSource::Model(cfg.forecaster),
    };
    Ok(Loaded { scenario, forecasts })
}
