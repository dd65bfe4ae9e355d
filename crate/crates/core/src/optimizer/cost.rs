use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SlotDecision, TariffKind};
use crate::scenario::{DayScenario, DayTraces};

/// Cost terms of one prosumer over one or more slots, $.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub grid: f64,
    pub battery: f64,
    pub buy: f64,
    /// Local sales revenue.
    pub sell: f64,
    /// Energy plus reserve revenue.
    pub v2g: f64,
    /// Charge on missed departure or final-slot energy.
    pub penalty: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.grid + self.battery + self.buy - self.sell - self.v2g + self.penalty
    }

    pub fn add(&mut self, o: &CostBreakdown) {
        self.grid += o.grid;
        self.battery += o.battery;
        self.buy += o.buy;
        self.sell += o.sell;
        self.v2g += o.v2g;
        self.penalty += o.penalty;
    }
}

/// Outcome of executing a planned slot against realized load and PV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Realized {
    pub decision: SlotDecision,
    /// Load left unserved after PV and grid reached their caps, kW.
    pub shortfall: f64,
    /// Supply that could not be absorbed after grid import hit zero and PV
    /// was fully curtailed, kW.
    pub spill: f64,
}

/// Execute `planned` against the realized load and PV. EV, trading and
/// reserve decisions are kept; PV and then grid import absorb the error.
pub fn realize_slot(planned: &SlotDecision, load: f64, pv: f64, grid_cap: f64) -> Realized {
    let mut d = *planned;
    d.p_renew = d.p_renew.min(pv).max(0.0);
    let need = load + d.p_evc - d.p_buy - d.p_v2h;
    let mut e = need - d.p_grid - d.p_renew;
    let (mut shortfall, mut spill) = (0.0, 0.0);
    if e > 0.0 {
        let r = (pv - d.p_renew).max(0.0).min(e);
        d.p_renew += r;
        e -= r;
        let g = (grid_cap - d.p_grid).max(0.0).min(e);
        d.p_grid += g;
        e -= g;
        shortfall = e;
    } else if e < 0.0 {
        let mut s = -e;
        let g = d.p_grid.min(s);
        d.p_grid -= g;
        s -= g;
        let r = d.p_renew.min(s);
        d.p_renew -= r;
        s -= r;
        spill = s;
    }
    Realized {
        decision: d,
        shortfall,
        spill,
    }
}

/// Cost of prosumer `u` in `slot` for decision `d`, given the largest grid
/// import before this slot.
pub fn slot_cost(day: &DayScenario, u: usize, slot: usize, d: &SlotDecision, peak_before: f64) -> CostBreakdown {
    let dt = day.grid.slot_hours;
    let tariff = &day.tariff;
    let pr = &day.prosumers[u];
    let ev = &pr.ev;
    let mut grid = tariff.energy_price(slot) * d.p_grid * dt;
    if tariff.kind == TariffKind::Tpt {
        grid += tariff.peak_price() * (d.p_grid - peak_before).max(0.0);
    }
    let rate = day.settings.departure_penalty;
    let mut penalty = 0.0;
    if ev.parked {
        if slot == ev.avail_end {
            penalty += rate * (d.soc - ev.soc_desired_departure).abs();
        }
        if slot + 1 == day.slots() {
            penalty += rate * (ev.soc_requested_final - d.soc).max(0.0);
        }
    }
    CostBreakdown {
        grid,
        battery: ev.degradation_coeff * (d.p_evc * d.p_evc + d.p_evd * d.p_evd),
        buy: day.prices.local_buy[u][slot] * d.p_buy * dt,
        sell: day.prices.local_sell[u][slot] * d.p_sell * dt,
        v2g: (day.prices.v2g_price[slot] * d.p_v2g + day.prices.reserve_price[slot] * d.p_as) * dt,
        penalty,
    }
}

/// Price `decisions[u][k]` (slot `start + k`) after executing them against
/// the realized traces. `peaks` is the realized grid peak before `start`.
pub fn evaluate_cost(
    day: &DayScenario,
    decisions: &[Vec<SlotDecision>],
    realized: &DayTraces,
    start: usize,
    peaks: &[f64],
) -> Result<Vec<Vec<CostBreakdown>>> {
    let n = day.prosumers.len();
    if decisions.len() != n || realized.load.len() != n || realized.pv.len() != n || peaks.len() != n {
        return Err(Error::Dimension("decisions, traces and peaks must cover every prosumer"));
    }
    let mut out = Vec::with_capacity(n);
    for (u, trace) in decisions.iter().enumerate() {
        if start + trace.len() > day.slots() || realized.load[u].len() < start + trace.len() || realized.pv[u].len() < start + trace.len() {
            return Err(Error::Dimension("decision trace runs past the realized data"));
        }
        let mut peak = peaks[u];
        let mut row = Vec::with_capacity(trace.len());
        for (k, d) in trace.iter().enumerate() {
            let t = start + k;
            let r = realize_slot(d, realized.load[u][t], realized.pv[u][t], day.prosumers[u].grid_import_cap);
            row.push(slot_cost(day, u, t, &r.decision, peak));
            peak = peak.max(r.decision.p_grid);
        }
        out.push(row);
    }
    Ok(out)
}
