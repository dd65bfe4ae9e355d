//! Subcommand implementations. Every command solves first and writes its
//! files only once all work has succeeded.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use v2x_core::forecast::{ForecastTarget, ForecasterSpec};
use v2x_core::metrics::{
    baseline_set, bin_curve, cost_reduction, marginal_contribution, optimal_cost, sweep_point, CurveBin, Marginal,
    ScenarioResult, SweepPoint,
};
use v2x_core::optimizer::{assemble, dump, SolveStatus, TargetMode, WindowInputs, WindowState};
use v2x_core::rho::{day_ahead, run_day, Event, RunLedger, RunOptions};
use v2x_core::scenario::{Assumptions, Scenario};

use crate::config::Experiment;
use crate::forecasts::write_forecasts;
use crate::error::{CliError, Result};
use crate::output::{create_dir, write_json, write_ledger, write_table};
use crate::{load, Loaded};

pub struct Context {
    pub experiment: Experiment,
    pub out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(experiment: Experiment, out: PathBuf, jobs: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config {
                path: "--jobs".into(),
                message: e.to_string(),
            })?;
        Ok(Self { experiment, out, pool })
    }

    fn options(&self, keep_forecasts: bool) -> RunOptions {
        self.experiment.solver.run_options(keep_forecasts)
    }

    /// Map `f` over `items` on the worker pool; results keep input order.
    fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

#[derive(Debug, Serialize)]
struct DaySummary {
    day: usize,
    total_cost: f64,
    slot_costs: Vec<f64>,
    re_load: Option<f64>,
    re_pv: Option<f64>,
    soft_targets: usize,
    missed_targets: usize,
    fallbacks: usize,
    network_violations: usize,
    shortfall_kwh: f64,
    spill_kwh: f64,
    events: Vec<Event>,
}

impl DaySummary {
    fn of(ledger: &RunLedger, slot_hours: f64) -> Self {
        let count = |f: fn(&Event) -> bool| ledger.events.iter().filter(|e| f(e)).count();
        let energy = |spill: bool| {
            ledger
                .events
                .iter()
                .map(|e| match e {
                    Event::Shortfall { kw, .. } if !spill => kw * slot_hours,
                    Event::Spill { kw, .. } if spill => kw * slot_hours,
                    _ => 0.0,
                })
                .sum()
        };
        Self {
            day: ledger.day,
            total_cost: ledger.total,
            slot_costs: ledger.slot_costs.clone(),
            re_load: ledger.errors.re_load().ok(),
            re_pv: ledger.errors.re_pv().ok(),
            soft_targets: count(|e| matches!(e, Event::SoftTarget { .. })),
            missed_targets: count(|e| matches!(e, Event::MissedTarget { .. })),
            fallbacks: count(|e| matches!(e, Event::Fallback { .. })),
            network_violations: count(|e| matches!(e, Event::Network(_))),
            shortfall_kwh: energy(false),
            spill_kwh: energy(true),
            events: ledger.events.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    command: &'static str,
    experiment: &'a Experiment,
    assumptions: &'a Assumptions,
    prosumers: usize,
    total_cost: f64,
    days: Vec<DaySummary>,
}

fn day_indices(sc: &Scenario) -> Vec<usize> {
    (0..sc.days.len()).collect()
}

pub fn run(ctx: &Context, save_forecasts: bool) -> Result<()> {
    let loaded = load(&ctx.experiment)?;
    loaded.require_history()?;
    let Loaded { scenario, forecasts } = loaded;
    let opts = ctx.options(save_forecasts);
    let f = forecasts.forecaster();
    let ledgers = ctx.par_map(&day_indices(&scenario), |&d| {
        run_day(&scenario, d, f, &opts).map_err(CliError::solver)
    })?;

    let dir = create_dir(&ctx.out.join("ledgers"))?;
    for l in &ledgers {
        write_ledger(&dir.join(format!("day_{}.csv", l.day)), l)?;
    }
    if save_forecasts {
        let dir = create_dir(&ctx.out.join("forecasts"))?;
        for l in &ledgers {
            write_forecasts(&dir.join(format!("day_{}.csv", l.day)), l.day, &l.forecasts)?;
        }
    }
    let dt = ctx.experiment.scenario.slot_hours;
    let days: Vec<DaySummary> = ledgers.iter().map(|l| DaySummary::of(l, dt)).collect();
    let total_cost = days.iter().map(|d| d.total_cost).sum();
    write_json(
        &ctx.out.join("summary.json"),
        &RunSummary {
            command: "run",
            experiment: &ctx.experiment,
            assumptions: &scenario.assumptions,
            prosumers: scenario.num_prosumers(),
            total_cost,
            days,
        },
    )?;
    println!("{} days, {} prosumers, total cost {total_cost:.4} $", ledgers.len(), scenario.num_prosumers());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    command: &'static str,
    experiment: &'a Experiment,
    assumptions: &'a Assumptions,
    target: ForecastTarget,
    seeds: Vec<u64>,
    points: &'a [SweepPoint],
    curve: &'a [CurveBin],
}

/// Noise seeds of a sweep, consecutive from the scenario seed.
pub fn sweep_seeds(scenario_seed: u64, count: u64) -> Vec<u64> {
    (0..count).map(|k| scenario_seed.wrapping_add(k)).collect()
}

/// Bin edges are multiples of the width; drop the float noise of the product.
fn edge(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

pub fn sweep(ctx: &Context, sigmas: &[f64], seeds: u64, target: ForecastTarget, bin_width: f64) -> Result<()> {
    let arg_error = |message: &str| CliError::Config {
        path: "sweep".into(),
        message: message.into(),
    };
    if sigmas.is_empty() || sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(arg_error("sigmas must be finite and nonnegative"));
    }
    if seeds == 0 || !(bin_width > 0.0) {
        return Err(arg_error("seeds and bin width must be positive"));
    }
    let Loaded { scenario, .. } = load(&ctx.experiment)?;
    let opts = ctx.options(false);
    let perfect = ctx.par_map(&day_indices(&scenario), |&d| {
        run_day(&scenario, d, &ForecasterSpec::perfect(), &opts).map_err(CliError::solver)
    })?;
    let seed_list = sweep_seeds(ctx.experiment.scenario.seed, seeds);
    let tasks: Vec<(f64, u64)> = sigmas
        .iter()
        .flat_map(|&s| seed_list.iter().map(move |&k| (s, k)))
        .collect();
    let points = ctx.par_map(&tasks, |&(sigma, seed)| {
        sweep_point(&scenario, &perfect, sigma, seed, target, &opts).map_err(CliError::solver)
    })?;
    let curve = bin_curve(&points, bin_width);

    create_dir(&ctx.out)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.sigma.to_string(), p.seed.to_string(), p.re.to_string(), p.rec.to_string()])
        .collect();
    write_table(&ctx.out.join("sweep.csv"), &["sigma", "seed", "re", "rec"], &rows)?;
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|b| {
            vec![
                edge(b.re_low).to_string(),
                edge(b.re_high).to_string(),
                b.count.to_string(),
                b.mean_rec.to_string(),
                b.std_rec.to_string(),
            ]
        })
        .collect();
    write_table(&ctx.out.join("curve.csv"), &["re_low", "re_high", "count", "mean_rec", "std_rec"], &rows)?;
    write_json(
        &ctx.out.join("summary.json"),
        &SweepSummary {
            command: "sweep",
            experiment: &ctx.experiment,
            assumptions: &scenario.assumptions,
            target,
            seeds: seed_list,
            points: &points,
            curve: &curve,
        },
    )?;
    for b in &curve {
        println!(
            "RE {:>5.1}-{:<5.1}% n={:<3} REC {:.3}% +- {:.3}%",
            100.0 * b.re_low,
            100.0 * b.re_high,
            b.count,
            100.0 * b.mean_rec,
            100.0 * b.std_rec
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MarginalRow {
    stream: &'static str,
    #[serde(flatten)]
    marginal: Marginal,
}

#[derive(Debug, Serialize)]
struct BaselineSummary<'a> {
    command: &'static str,
    experiment: &'a Experiment,
    assumptions: &'a Assumptions,
    results: &'a [ScenarioResult],
    marginals: &'a [MarginalRow],
}

pub fn baselines(ctx: &Context) -> Result<()> {
    let Loaded { scenario, .. } = load(&ctx.experiment)?;
    let opts = ctx.options(false);
    let set = baseline_set();
    let costs = ctx.par_map(&set, |(_, streams)| {
        optimal_cost(&scenario, *streams, opts.mode, &opts).map_err(CliError::solver)
    })?;
    let reference = costs[set.len() - 1];
    let cfg = &ctx.experiment.scenario;
    let results: Vec<ScenarioResult> = set
        .iter()
        .zip(&costs)
        .map(|((name, streams), &cost)| {
            Ok(ScenarioResult {
                id: (*name).to_string(),
                tariff: cfg.tariff,
                market: cfg.market,
                streams: *streams,
                total_cost: cost,
                cost_reduction: cost_reduction(cost, reference)?,
                rec: None,
                re_load: None,
                re_pv: None,
            })
        })
        .collect::<Result<_>>()?;
    let marginals: Vec<MarginalRow> = [("v2h", 4), ("v2g", 5), ("et", 6)]
        .into_iter()
        .map(|(stream, i)| {
            Ok(MarginalRow {
                stream,
                marginal: marginal_contribution(&results[0], &results[i])?,
            })
        })
        .collect::<Result<_>>()?;

    create_dir(&ctx.out)?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.id.clone(),
                r.streams.label(),
                r.total_cost.to_string(),
                r.cost_reduction.to_string(),
            ]
        })
        .collect();
    write_table(
        &ctx.out.join("baselines.csv"),
        &["name", "streams", "total_cost", "cost_reduction_pct"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = marginals
        .iter()
        .map(|m| vec![m.stream.to_string(), m.marginal.absolute.to_string(), m.marginal.ratio.to_string()])
        .collect();
    write_table(&ctx.out.join("marginals.csv"), &["stream", "absolute_pp", "ratio_pct"], &rows)?;
    write_json(
        &ctx.out.join("summary.json"),
        &BaselineSummary {
            command: "baselines",
            experiment: &ctx.experiment,
            assumptions: &scenario.assumptions,
            results: &results,
            marginals: &marginals,
        },
    )?;
    println!("{:<12} {:<12} {:>14} {:>10}", "name", "streams", "cost $", "reduction");
    for r in &results {
        println!(
            "{:<12} {:<12} {:>14.4} {:>9.3}%",
            r.id,
            r.streams.label(),
            r.total_cost,
            r.cost_reduction
        );
    }
    Ok(())
}

pub fn validate(ctx: &Context) -> Result<()> {
    let loaded = load(&ctx.experiment)?;
    loaded.require_history()?;
    let Loaded { scenario, forecasts } = loaded;
    let kind = match forecasts {
        crate::ForecastSource::Model(spec) => format!("{:?}", spec.kind),
        crate::ForecastSource::Table(t) => format!("table with {} entries", t.entries.len()),
    };
    println!(
        "valid: {} days, {} history days, {} prosumers, {} nodes, forecasts: {kind}",
        scenario.days.len(),
        scenario.history.len(),
        scenario.num_prosumers(),
        scenario.days[0].network.num_nodes(),
    );
    Ok(())
}

/// Write the window problem starting at `slot` of `day`. Stored energy at the
/// window start is taken from the perfect-information plan of that day.
pub fn dump_problem(ctx: &Context, day: usize, slot: usize) -> Result<()> {
    let Loaded { scenario, .. } = load(&ctx.experiment)?;
    let range = |message: String| CliError::OutOfRange {
        path: "dump-problem".into(),
        message,
    };
    let d = scenario
        .days
        .get(day)
        .ok_or_else(|| range(format!("day {day} is outside the {}-day scenario", scenario.days.len())))?;
    let h = d.slots();
    if slot >= h {
        return Err(range(format!("slot {slot} is outside a {h}-slot day")));
    }
    let opts = ctx.options(false);
    let state = if slot == 0 {
        WindowState::initial(d)
    } else {
        let plan = day_ahead(d, opts.mode, &opts.limits).map_err(CliError::solver)?;
        if plan.status == SolveStatus::Infeasible {
            return Err(CliError::Solver(format!("day {day} has no feasible plan")));
        }
        let prefix: Vec<_> = plan.decisions.iter().map(|row| row[..slot].to_vec()).collect();
        WindowState::after(d, &prefix)?
    };
    let problem = assemble(d, slot..h, &state, &WindowInputs::realized(d, slot..h), TargetMode::Auto)?;
    let dir = create_dir(&ctx.out.join("problems"))?;
    let path = dir.join(format!("day_{day}_slot_{slot}.txt"));
    std::fs::write(&path, dump(&problem)).map_err(CliError::io(&path))?;
    println!("{} variables written to {}", problem.len(), path.display());
    Ok(())
}
