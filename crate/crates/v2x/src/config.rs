//! Experiment files.
//!
//! An experiment is one TOML file with three optional tables:
//!
//! ```toml
//! [scenario]          # any field of ScenarioConfig
//! days = 7
//! tariff = "tpt"
//! communities = [{ node = 4, prosumers = 20 }]
//!
//! [data]              # paths are relative to the experiment file
//! topology = "feeder.csv"
//! load = "load.csv"
//! pv = "pv.csv"
//! prices = "prices.csv"
//! forecasts = "forecasts.csv"
//!
//! [solver]
//! mode = "branch"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use v2x_core::network::{IEEE33_BASE_KV, IEEE33_BASE_MVA};
use v2x_core::optimizer::{MiqpLimits, MiqpMode};
use v2x_core::rho::RunOptions;
use v2x_core::scenario::ScenarioConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Feeder file (CSV or JSON). Replaces the built-in topology.
    pub topology: Option<PathBuf>,
    /// Bases used to convert ohms from a CSV feeder file.
    pub base_mva: f64,
    pub base_kv: f64,
    pub load: Option<PathBuf>,
    pub pv: Option<PathBuf>,
    /// Market price series applied to every day.
    pub prices: Option<PathBuf>,
    /// Precomputed forecasts. Replaces the configured forecaster.
    pub forecasts: Option<PathBuf>,
}

impl Default for DataPaths {
    fn default() -> Self {
        Self {
            topology: None,
            base_mva: IEEE33_BASE_MVA,
            base_kv: IEEE33_BASE_KV,
            load: None,
            pv: None,
            prices: None,
            forecasts: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub mode: MiqpMode,
    pub max_nodes: usize,
    pub max_repair_passes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let l = MiqpLimits::default();
        Self {
            mode: MiqpMode::Repair,
            max_nodes: l.max_nodes,
            max_repair_passes: l.max_repair_passes,
        }
    }
}

impl SolverOptions {
    pub fn run_options(&self, keep_forecasts: bool) -> RunOptions {
        RunOptions {
            mode: self.mode,
            limits: MiqpLimits {
                max_nodes: self.max_nodes,
                max_repair_passes: self.max_repair_passes,
                ..MiqpLimits::default()
            },
            keep_forecasts,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub scenario: ScenarioConfig,
    pub data: DataPaths,
    pub solver: SolverOptions,
}

impl Experiment {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    /// Read an experiment file and make its data paths absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut exp = Self::from_toml(&text, path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let d = &mut exp.data;
        for p in [&mut d.topology, &mut d.load, &mut d.pv, &mut d.prices, &mut d.forecasts].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(exp)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment serializes")
    }
}
