//! Rolling-horizon execution of a day with a shrinking window.
//!
//! At slot `t` the window is `[t, H)`. Slot `t` uses realized load and PV,
//! later slots use forecasts made at origin `t`. Only the slot-`t` decisions
//! are executed, under the realization rule of
//! [`realize_slot`](crate::optimizer::realize_slot).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{ErrorSample, ForecastContext, ForecastSeries, Forecaster};
use crate::model::{SlotDecision, POWER_TOL};
use crate::network::{check_limits, net_loads, propagate, FlowState, LimitViolation};
use crate::optimizer::{
    assemble, realize_slot, slot_cost, solve_miqp, CostBreakdown, Diagnostic, FixedBy, MiqpLimits, MiqpMode,
    SolveReport, SolveStatus, TargetMode, WindowInputs, WindowState,
};
use crate::scenario::{DayScenario, DayTraces, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub mode: MiqpMode,
    pub limits: MiqpLimits,
    /// Keep every forecast made during the day in the ledger.
    pub keep_forecasts: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            mode: MiqpMode::Repair,
            limits: MiqpLimits::default(),
            keep_forecasts: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Event {
    /// Realized load above what PV and the grid cap could serve, kW.
    Shortfall { prosumer: usize, slot: usize, kw: f64 },
    /// Planned supply that realized load could not absorb, kW.
    Spill { prosumer: usize, slot: usize, kw: f64 },
    /// A departure or final target was solved as a soft constraint.
    SoftTarget { prosumer: usize, slot: usize, target: f64, reachable_high: f64 },
    /// Departure energy missed at execution, kWh.
    MissedTarget { prosumer: usize, slot: usize, soc: f64, target: f64 },
    /// The window problem could not be solved and the fallback ran.
    Fallback { slot: usize, reason: String },
    /// Executed flows outside the feeder limits.
    Network(LimitViolation),
}

/// Per-slot record of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub slot: usize,
    pub status: SolveStatus,
    pub fixed_by: FixedBy,
    pub objective: f64,
    pub nodes: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub day: usize,
    /// Executed decisions, `[prosumer][slot]`.
    pub decisions: Vec<Vec<SlotDecision>>,
    /// `[prosumer][slot]`.
    pub costs: Vec<Vec<CostBreakdown>>,
    /// Cost of all prosumers in each slot.
    pub slot_costs: Vec<f64>,
    pub total: f64,
    pub flows: FlowState,
    pub events: Vec<Event>,
    pub solves: Vec<SolveSummary>,
    /// Forecast points inside each EV window.
    pub errors: ErrorSample,
    /// Forecast points over all slots.
    pub errors_all_slots: ErrorSample,
    pub forecasts: Vec<ForecastSeries>,
}

impl RunLedger {
    /// Per-prosumer cost of each slot, `[prosumer][slot]`.
    pub fn cost_matrix(&self) -> Vec<Vec<f64>> {
        self.costs.iter().map(|r| r.iter().map(CostBreakdown::total).collect()).collect()
    }
}

fn traces_of(day: &DayScenario) -> DayTraces {
    DayTraces {
        load: day.prosumers.iter().map(|p| p.load_trace.clone()).collect(),
        pv: day.prosumers.iter().map(|p| p.pv_cap_trace.clone()).collect(),
    }
}

/// EV parking windows as inclusive slot ranges; an EV that never parks gets
/// an empty range.
pub fn ev_windows(day: &DayScenario) -> Vec<(usize, usize)> {
    day.prosumers
        .iter()
        .map(|p| {
            if p.ev.parked {
                (p.ev.avail_start, p.ev.avail_end)
            } else {
                (1, 0)
            }
        })
        .collect()
}

/// Solve the whole day at once with realized data.
pub fn day_ahead(day: &DayScenario, mode: MiqpMode, limits: &MiqpLimits) -> Result<SolveReport> {
    let h = day.slots();
    let state = WindowState::initial(day);
    let inputs = WindowInputs::realized(day, 0..h);
    solve_window(day, 0..h, &state, &inputs, mode, limits).map(|(r, _)| r)
}

fn solve_window(
    day: &DayScenario,
    window: core::ops::Range<usize>,
    state: &WindowState,
    inputs: &WindowInputs,
    mode: MiqpMode,
    limits: &MiqpLimits,
) -> Result<(SolveReport, Vec<Diagnostic>)> {
    let p = assemble(day, window.clone(), state, inputs, TargetMode::Auto)?;
    let r = solve_miqp(&p, mode, limits)?;
    if r.status == SolveStatus::Infeasible {
        let p = assemble(day, window, state, inputs, TargetMode::Soft)?;
        let r = solve_miqp(&p, mode, limits)?;
        return Ok((r, p.diagnostics));
    }
    Ok((r, p.diagnostics))
}

/// Charge toward the departure target at full rate and serve load from PV
/// and the grid.
fn fallback_slot(day: &DayScenario, u: usize, t: usize, soc: f64, load: f64, pv: f64) -> SlotDecision {
    let pr = &day.prosumers[u];
    let ev = &pr.ev;
    let dt = day.grid.slot_hours;
    let mut evc = 0.0;
    if ev.is_parked(t) && soc < ev.soc_desired_departure {
        evc = ev
            .p_charge_max
            .min((ev.soc_desired_departure - soc) / (ev.charge_eff * dt))
            .min((ev.capacity_max - soc) / (ev.charge_eff * dt))
            .min((pr.grid_import_cap + pv - load).max(0.0));
    }
    let renew = pv.min(load + evc);
    let grid = (load + evc - renew).clamp(0.0, pr.grid_import_cap);
    SlotDecision {
        p_grid: grid,
        p_renew: renew,
        p_evc: evc,
        soc: soc + ev.charge_eff * evc * dt,
        ..Default::default()
    }
}

fn history_for(scenario: &Scenario, d: usize, need: usize) -> Result<Vec<DayTraces>> {
    let mut out = Vec::with_capacity(need);
    for lag in 1..=need {
        match scenario.past_traces(d, lag) {
            Some(t) => out.push(t),
            None => {
                return Err(Error::InsufficientHistory {
                    needed: need,
                    available: lag - 1,
                })
            }
        }
    }
    Ok(out)
}

/// Run day `d` of `scenario` in a rolling horizon.
pub fn run_day(scenario: &Scenario, d: usize, forecaster: &dyn Forecaster, opts: &RunOptions) -> Result<RunLedger> {
    let day = scenario
        .days
        .get(d)
        .ok_or_else(|| Error::MissingData(alloc::format!("day {d} is not in the scenario")))?;
    let history = history_for(scenario, d, forecaster.history_needed())?;
    run_day_with(day, d, &traces_of(day), &history, forecaster, opts)
}

/// Rolling-horizon run of one day given its realized traces and the history
/// visible to the forecaster.
pub fn run_day_with(
    day: &DayScenario,
    day_index: usize,
    realized: &DayTraces,
    history: &[DayTraces],
    forecaster: &dyn Forecaster,
    opts: &RunOptions,
) -> Result<RunLedger> {
    day.validate()?;
    let h = day.slots();
    let n = day.prosumers.len();
    if realized.load.len() != n || realized.pv.len() != n || realized.load.iter().chain(&realized.pv).any(|r| r.len() != h) {
        return Err(Error::Dimension("realized traces must cover every prosumer and slot"));
    }
    let ctx = ForecastContext {
        day: day_index,
        realized,
        history,
    };
    let windows = ev_windows(day);
    let mut state = WindowState::initial(day);
    let mut decisions = vec![Vec::with_capacity(h); n];
    let mut costs = vec![Vec::with_capacity(h); n];
    let mut slot_costs = Vec::with_capacity(h);
    let mut events = Vec::new();
    let mut solves = Vec::with_capacity(h);
    let mut errors = ErrorSample::new(n);
    let mut errors_all = ErrorSample::new(n);
    let mut forecasts = Vec::new();
    let mut soft_logged = vec![false; n];

    for t in 0..h {
        let horizon = h - 1 - t;
        let mut inputs = WindowInputs {
            load: (0..n).map(|u| vec![realized.load[u][t]]).collect(),
            pv: (0..n).map(|u| vec![realized.pv[u][t]]).collect(),
        };
        if horizon > 0 {
            let f = forecaster.forecast(&ctx, t, horizon)?;
            if f.load.len() != n || f.pv.len() != n || f.load.iter().chain(&f.pv).any(|r| r.len() != horizon) {
                return Err(Error::Dimension("forecast does not cover the window"));
            }
            for u in 0..n {
                inputs.load[u].extend(f.load[u].iter().map(|v| v.max(0.0)));
                inputs.pv[u].extend(f.pv[u].iter().map(|v| v.max(0.0)));
            }
            errors.record(&f, realized, Some(&windows));
            errors_all.record(&f, realized, None);
            if opts.keep_forecasts {
                forecasts.push(f);
            }
        }

        let solved = solve_window(day, t..h, &state, &inputs, opts.mode, &opts.limits);
        let plan: Option<Vec<SlotDecision>> = match solved {
            Ok((r, diags)) => {
                solves.push(SolveSummary {
                    slot: t,
                    status: r.status,
                    fixed_by: r.fixed_by,
                    objective: r.objective,
                    nodes: r.nodes,
                    iterations: r.iterations,
                });
                for dg in diags {
                    let Diagnostic::SoftTarget {
                        prosumer,
                        target,
                        reachable_high,
                        ..
                    } = dg;
                    if !soft_logged[prosumer] {
                        soft_logged[prosumer] = true;
                        events.push(Event::SoftTarget {
                            prosumer,
                            slot: t,
                            target,
                            reachable_high,
                        });
                    }
                }
                let usable = r.status == SolveStatus::Optimal
                    || (r.status == SolveStatus::IterLimit
                        && r.decisions.iter().all(|row| {
                            let s = &row[0];
                            !(s.p_evc > POWER_TOL && s.p_evd > POWER_TOL) && !(s.p_buy > POWER_TOL && s.p_sell > POWER_TOL)
                        })
                        && r.residual < 1e-5);
                if usable {
                    if r.status != SolveStatus::Optimal {
                        events.push(Event::Fallback {
                            slot: t,
                            reason: "iteration limit; best incumbent executed".into(),
                        });
                    }
                    Some(r.decisions.iter().map(|row| row[0]).collect())
                } else {
                    events.push(Event::Fallback {
                        slot: t,
                        reason: alloc::format!("{:?}", r.status),
                    });
                    None
                }
            }
            Err(e) => {
                events.push(Event::Fallback {
                    slot: t,
                    reason: alloc::format!("{e}"),
                });
                None
            }
        };

        let mut slot_total = 0.0;
        for u in 0..n {
            let (load, pv) = (realized.load[u][t], realized.pv[u][t]);
            let planned = match &plan {
                Some(p) => p[u],
                None => fallback_slot(day, u, t, state.soc[u], load, pv),
            };
            let r = realize_slot(&planned, load, pv, day.prosumers[u].grid_import_cap);
            if r.shortfall > POWER_TOL {
                events.push(Event::Shortfall {
                    prosumer: u,
                    slot: t,
                    kw: r.shortfall,
                });
            }
            if r.spill > POWER_TOL {
                events.push(Event::Spill {
                    prosumer: u,
                    slot: t,
                    kw: r.spill,
                });
            }
            let ev = &day.prosumers[u].ev;
            if ev.parked && t == ev.avail_end && (r.decision.soc - ev.soc_desired_departure).abs() > 1e-6 {
                events.push(Event::MissedTarget {
                    prosumer: u,
                    slot: t,
                    soc: r.decision.soc,
                    target: ev.soc_desired_departure,
                });
            }
            let c = slot_cost(day, u, t, &r.decision, state.peak[u]);
            slot_total += c.total();
            costs[u].push(c);
            state.peak[u] = state.peak[u].max(r.decision.p_grid);
            state.soc[u] = r.decision.soc;
            decisions[u].push(r.decision);
        }
        slot_costs.push(slot_total);
    }

    let flows = propagate(&day.network, &net_loads(&day.network, &day.prosumers, &decisions)?)?;
    events.extend(check_limits(&flows, &day.network).into_iter().map(Event::Network));
    Ok(RunLedger {
        day: day_index,
        decisions,
        costs,
        total: slot_costs.iter().sum(),
        slot_costs,
        flows,
        events,
        solves,
        errors,
        errors_all_slots: errors_all,
        forecasts,
    })
}

/// Run the given days in order.
pub fn run_campaign(
    scenario: &Scenario,
    days: core::ops::Range<usize>,
    forecaster: &dyn Forecaster,
    opts: &RunOptions,
) -> Result<Vec<RunLedger>> {
    if days.is_empty() {
        return Err(Error::InvalidParameter("a campaign needs at least one day".into()));
    }
    days.map(|d| run_day(scenario, d, forecaster, opts)).collect()
}

/// Daily totals of a campaign.
pub fn totals(ledgers: &[RunLedger]) -> Vec<f64> {
    ledgers.iter().map(|l| l.total).collect()
}
