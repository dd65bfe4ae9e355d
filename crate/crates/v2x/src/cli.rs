use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use v2x_core::forecast::ForecastTarget;
use v2x_core::model::TariffKind;
use v2x_core::optimizer::MiqpMode;
use v2x_core::scenario::MarketKind;
use v2x_core::streams::StreamToggle;

use crate::commands;
use crate::config::Experiment;
use crate::error::{exit, Result};

#[derive(Debug, Parser)]
#[command(name = "v2x", version, about = "Network-aware EV value stacking experiments")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment file (TOML). Defaults to the built-in 60-prosumer setup.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, global = true, value_enum)]
    pub market: Option<Market>,
    #[arg(long, global = true, value_enum)]
    pub tariff: Option<Tariff>,
    /// Enabled streams, e.g. `v2h,et`, or `none`.
    #[arg(long, global = true, value_parser = parse_streams)]
    pub streams: Option<StreamToggle>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rolling-horizon campaign over every configured day.
    Run {
        /// Also write every forecast made to forecasts/day_<d>.csv.
        #[arg(long)]
        save_forecasts: bool,
    },
    /// Forecast-error sensitivity sweep with error injection.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3])]
        sigmas: Vec<f64>,
        /// Noise seeds per sigma, numbered from the scenario seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, value_enum, default_value = "load")]
        target: Target,
        #[arg(long, default_value_t = 0.05)]
        bin_width: f64,
    },
    /// Full stack, single streams, leave-one-out and the reference.
    Baselines,
    /// Check the experiment and its data without solving.
    Validate,
    /// Write the window problem of one day and slot.
    DumpProblem {
        #[arg(long, default_value_t = 0)]
        day: usize,
        #[arg(long, default_value_t = 0)]
        slot: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Repair,
    Branch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Market {
    Nem,
    Isone,
    Nyiso,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Tariff {
    Tou,
    Tpt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Target {
    Load,
    Pv,
    Both,
}

impl From<Target> for ForecastTarget {
    fn from(t: Target) -> Self {
        match t {
            Target::Load => ForecastTarget::Load,
            Target::Pv => ForecastTarget::Pv,
            Target::Both => ForecastTarget::Both,
        }
    }
}

pub fn parse_streams(s: &str) -> std::result::Result<StreamToggle, String> {
    let mut t = StreamToggle::NONE;
    if s.trim() == "none" {
        return Ok(t);
    }
    for part in s.split(',').map(str::trim) {
        match part {
            "v2h" => t.v2h = true,
            "v2g" => t.v2g = true,
            "et" => t.trading = true,
            other => return Err(format!("unknown stream '{other}', expected v2h, v2g, et or none")),
        }
    }
    Ok(t)
}

impl Common {
    /// The experiment file with command-line overrides applied.
    pub fn experiment(&self) -> Result<Experiment> {
        let mut exp = match &self.config {
            Some(path) => Experiment::load(path)?,
            None => Experiment::default(),
        };
        let s = &mut exp.scenario;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(m) = self.market {
            s.market = match m {
                Market::Nem => MarketKind::Nem,
                Market::Isone => MarketKind::Isone,
                Market::Nyiso => MarketKind::Nyiso,
            };
        }
        if let Some(t) = self.tariff {
            s.tariff = match t {
                Tariff::Tou => TariffKind::Tou,
                Tariff::Tpt => TariffKind::Tpt,
            };
        }
        if let Some(streams) = self.streams {
            s.streams = streams;
        }
        if let Some(mode) = self.mode {
            exp.solver.mode = match mode {
                Mode::Repair => MiqpMode::Repair,
                Mode::Branch => MiqpMode::Branch,
            };
        }
        Ok(exp)
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let exp = cli.common.experiment()?;
    let ctx = commands::Context::new(exp, cli.common.out.clone(), cli.common.jobs)?;
    match &cli.command {
        Command::Run { save_forecasts } => commands::run(&ctx, *save_forecasts),
        Command::Sweep {
            sigmas,
            seeds,
            target,
            bin_width,
        } => commands::sweep(&ctx, sigmas, *seeds, (*target).into(), *bin_width),
        Command::Baselines => commands::baselines(&ctx),
        Command::Validate => commands::validate(&ctx),
        Command::DumpProblem { day, slot } => commands::dump_problem(&ctx, *day, *slot),
    }
}

/// Parse `args`, run the command and return the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    match dispatch(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            e.exit_code()
        }
    }
}
