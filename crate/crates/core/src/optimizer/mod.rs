//! The value-stacking problem over a window of slots.
//!
//! Every prosumer-slot owns [`FIELDS`] consecutive columns laid out as in
//! [`Field`]. Columns that a disabled stream or an absent EV cannot use are
//! given zero bounds and vanish in presolve. Extra columns follow: one peak
//! epigraph per prosumer under TPT, departure slacks for soft targets and one
//! net-injection column per occupied feeder node and slot.
//!
//! The binaries of the charge/discharge and buy/sell pairs are not modeled as
//! columns. Their convex relaxation is the row `a/ā + b/b̄ ≤ 1`, and the
//! integer solvers in [`solve_miqp`] enforce them by fixing one member of a
//! pair to zero.

mod cost;
mod dump;
mod miqp;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SlotDecision, TariffKind};
use crate::network::{propagate, NetLoads};
use crate::qp::{QuadProgram, TripletBuilder};
use crate::scenario::DayScenario;

pub use cost::{evaluate_cost, realize_slot, slot_cost, CostBreakdown, Realized};
pub use dump::dump;
pub use miqp::{solve_miqp, solve_qp, FixedBy, MiqpLimits, MiqpMode, SolveReport, SolveStatus, PAIR_TOL};

pub const FIELDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(usize)]
pub enum Field {
    Grid = 0,
    Renew,
    Buy,
    Sell,
    Evc,
    Evd,
    V2h,
    V2g,
    As,
    Soc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    /// Charge versus discharge.
    Charge,
    /// Local buy versus local sell.
    Trade,
}

/// Two columns of which at most one may be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryPair {
    pub prosumer: usize,
    pub slot: usize,
    pub kind: PairKind,
    /// Charge or buy column.
    pub inflow: usize,
    /// Discharge or sell column.
    pub outflow: usize,
    /// Zero-cost column that can carry flow present on both members at
    /// once: moving `m` off `inflow` and `outflow` onto it leaves every row
    /// unchanged.
    pub bypass: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftSlack {
    /// Shortfall against the departure target, kWh.
    pub under: Option<usize>,
    /// Excess over the departure target, kWh.
    pub over: Option<usize>,
    /// Shortfall against the final-slot request, kWh.
    pub final_under: usize,
}

/// Notes raised while building a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Diagnostic {
    /// The departure or final target is out of reach at the EV's rates and
    /// was relaxed to a penalized soft constraint.
    SoftTarget {
        prosumer: usize,
        soc: f64,
        reachable_low: f64,
        reachable_high: f64,
        target: f64,
    },
}

/// How departure targets are imposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TargetMode {
    /// Hard unless provably out of reach.
    #[default]
    Auto,
    /// Soft for every EV.
    Soft,
}

/// Battery state entering the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowState {
    /// Stored energy before the first window slot, kWh.
    pub soc: Vec<f64>,
    /// Largest realized grid import so far, kW.
    pub peak: Vec<f64>,
}

impl WindowState {
    pub fn initial(day: &DayScenario) -> Self {
        Self {
            soc: day.prosumers.iter().map(|p| p.ev.soc_initial).collect(),
            peak: vec![0.0; day.prosumers.len()],
        }
    }

    /// State after the executed slots `prefix[u][0..k]`.
    pub fn after(day: &DayScenario, prefix: &[Vec<SlotDecision>]) -> Result<Self> {
        if prefix.len() != day.prosumers.len() {
            return Err(Error::Dimension("one executed trace per prosumer"));
        }
        let mut s = Self::initial(day);
        for (u, trace) in prefix.iter().enumerate() {
            if let Some(last) = trace.last() {
                s.soc[u] = last.soc;
            }
            s.peak[u] = trace.iter().fold(0.0, |m, d| f64::max(m, d.p_grid));
        }
        Ok(s)
    }
}

/// Load and available PV over the window, `[prosumer][k]` for slot
/// `start + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowInputs {
    pub load: Vec<Vec<f64>>,
    pub pv: Vec<Vec<f64>>,
}

impl WindowInputs {
    /// The day's realized traces.
    pub fn realized(day: &DayScenario, window: Range<usize>) -> Self {
        Self {
            load: day.prosumers.iter().map(|p| p.load_trace[window.clone()].to_vec()).collect(),
            pv: day.prosumers.iter().map(|p| p.pv_cap_trace[window.clone()].to_vec()).collect(),
        }
    }
}

/// An assembled window problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpProblem {
    pub qp: QuadProgram,
    pub start: usize,
    pub end: usize,
    pub prosumers: usize,
    pub zeta: Vec<Option<usize>>,
    pub slack: Vec<Option<SoftSlack>>,
    pub pairs: Vec<BinaryPair>,
    /// Energy price per window slot, used to break repair ties.
    pub slot_price: Vec<f64>,
    /// Mean energy price over the day.
    pub mean_price: f64,
    /// Net injection column per `(node, k)`.
    pub injection: BTreeMap<(usize, usize), usize>,
    pub diagnostics: Vec<Diagnostic>,
}

impl QpProblem {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn col(&self, prosumer: usize, k: usize, field: Field) -> usize {
        (prosumer * self.len() + k) * FIELDS + field as usize
    }

    /// Decisions encoded in `x`, `[prosumer][k]`.
    pub fn decisions(&self, x: &[f64]) -> Vec<Vec<SlotDecision>> {
        let clean = |v: f64| if v.abs() < 1e-10 { 0.0 } else { v };
        (0..self.prosumers)
            .map(|u| {
                (0..self.len())
                    .map(|k| {
                        let g = |f: Field| clean(x[self.col(u, k, f)]);
                        let mut d = SlotDecision {
                            p_grid: g(Field::Grid),
                            p_renew: g(Field::Renew),
                            p_buy: g(Field::Buy),
                            p_sell: g(Field::Sell),
                            p_evc: g(Field::Evc),
                            p_evd: g(Field::Evd),
                            p_v2h: g(Field::V2h),
                            p_v2g: g(Field::V2g),
                            p_as: g(Field::As),
                            soc: x[self.col(u, k, Field::Soc)],
                            x_discharge: false,
                            y_sell: false,
                        };
                        d.x_discharge = d.p_evd > PAIR_TOL;
                        d.y_sell = d.p_sell > PAIR_TOL;
                        d
                    })
                    .collect()
            })
            .collect()
    }
}

struct Rows {
    b: TripletBuilder,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Rows {
    fn push(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64) {
        let r = self.lo.len();
        self.b.grow_rows(r + 1);
        for &(c, v) in terms {
            if v != 0.0 {
                self.b.grow_cols(c + 1);
                self.b.push(r, c, v);
            }
        }
        self.lo.push(lo);
        self.hi.push(hi);
    }
}

const INF: f64 = f64::INFINITY;

/// Build the window problem for slots `window` of `day`.
pub fn assemble(
    day: &DayScenario,
    window: Range<usize>,
    state: &WindowState,
    inputs: &WindowInputs,
    targets: TargetMode,
) -> Result<QpProblem> {
    let h = day.slots();
    let (t0, t1) = (window.start, window.end);
    if t0 >= t1 || t1 > h {
        return Err(Error::Dimension("window must be a nonempty range inside the day"));
    }
    let len = t1 - t0;
    let n = day.prosumers.len();
    if state.soc.len() != n || state.peak.len() != n {
        return Err(Error::Dimension("window state must cover every prosumer"));
    }
    if inputs.load.len() != n || inputs.pv.len() != n {
        return Err(Error::Dimension("window inputs must cover every prosumer"));
    }
    for (l, p) in inputs.load.iter().zip(&inputs.pv) {
        if l.len() != len || p.len() != len {
            return Err(Error::Dimension("window inputs must cover the window"));
        }
        if l.iter().chain(p).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("window load and pv must be finite and nonnegative".into()));
        }
    }

    let dt = day.grid.slot_hours;
    let st = day.streams;
    let tariff = &day.tariff;
    let tpt = tariff.kind == TariffKind::Tpt;
    let penalty = day.settings.departure_penalty;

    let base = n * len * FIELDS;
    let mut ncols = base;
    let mut lower = vec![0.0; base];
    let mut upper = vec![0.0; base];
    let mut q = vec![0.0; base];
    let mut p_diag: Vec<(usize, f64)> = Vec::new();
    let mut offset = 0.0;
    let mut new_col = |lo: f64, hi: f64, cost: f64, lower: &mut Vec<f64>, upper: &mut Vec<f64>, q: &mut Vec<f64>| {
        lower.push(lo);
        upper.push(hi);
        q.push(cost);
        ncols += 1;
        ncols - 1
    };
    let col = |u: usize, k: usize, f: Field| (u * len + k) * FIELDS + f as usize;

    // column bounds and objective
    for (u, pr) in day.prosumers.iter().enumerate() {
        let ev = &pr.ev;
        let any_out = st.v2h || st.v2g || st.trading;
        for k in 0..len {
            let t = t0 + k;
            let parked = ev.is_parked(t);
            let mut set = |f: Field, hi: f64, cost: f64| {
                let c = col(u, k, f);
                upper[c] = hi;
                q[c] = cost;
            };
            set(Field::Grid, pr.grid_import_cap, tariff.energy_price(t) * dt);
            set(Field::Renew, inputs.pv[u][k], 0.0);
            if st.trading {
                set(Field::Buy, pr.local_buy_cap, day.prices.local_buy[u][t] * dt);
            }
            if parked {
                set(Field::Evc, ev.p_charge_max, 0.0);
                if any_out {
                    set(Field::Evd, ev.p_discharge_max, 0.0);
                }
                if st.trading {
                    set(Field::Sell, pr.local_sell_cap, -day.prices.local_sell[u][t] * dt);
                }
                if st.v2h {
                    set(Field::V2h, pr.v2h_cap, 0.0);
                }
                if st.v2g {
                    set(Field::V2g, pr.v2g_cap, -day.prices.v2g_price[t] * dt);
                    set(Field::As, ev.capacity_max / 2.0, -day.prices.reserve_price[t] * dt);
                }
            }
            let s = col(u, k, Field::Soc);
            lower[s] = ev.capacity_min;
            upper[s] = ev.capacity_max;
            let alpha = ev.degradation_coeff;
            if alpha > 0.0 {
                for f in [Field::Evc, Field::Evd] {
                    if upper[col(u, k, f)] > 0.0 {
                        p_diag.push((col(u, k, f), 2.0 * alpha));
                    }
                }
            }
        }
    }

    let mut rows = Rows {
        b: TripletBuilder::new(0, base),
        lo: Vec::new(),
        hi: Vec::new(),
    };

    // peak epigraph
    let mut zeta = vec![None; n];
    if tpt {
        let pi = tariff.peak_price();
        for u in 0..n {
            let z = new_col(state.peak[u], INF, pi, &mut lower, &mut upper, &mut q);
            offset -= pi * state.peak[u];
            zeta[u] = Some(z);
        }
    }

    // departure and final-slot targets
    let mut slack = vec![None; n];
    let mut diagnostics = Vec::new();
    let mut target_rows: Vec<(usize, Option<usize>, f64, f64)> = Vec::new();
    for (u, pr) in day.prosumers.iter().enumerate() {
        let ev = &pr.ev;
        if !ev.parked {
            continue;
        }
        let soc0 = state.soc[u];
        let parked_until = |last: usize| (t0..=last.min(t1 - 1)).filter(|&t| ev.is_parked(t)).count() as f64;
        let charge = ev.p_charge_max.min(pr.grid_import_cap + pr.local_buy_cap) * ev.charge_eff * dt;
        // V2H can only serve the household's own load while the EV is not
        // charging
        let export = (if st.v2g { pr.v2g_cap } else { 0.0 }) + (if st.trading { pr.local_sell_cap } else { 0.0 });
        let discharged_until = |last: usize| {
            (t0..=last.min(t1 - 1))
                .filter(|&t| ev.is_parked(t))
                .map(|t| {
                    let home = if st.v2h { pr.v2h_cap.min(inputs.load[u][t - t0]) } else { 0.0 };
                    ev.p_discharge_max.min(home + export) * dt / ev.discharge_eff
                })
                .sum::<f64>()
        };
        let dep_in_window = ev.avail_end >= t0 && ev.avail_end < t1;
        let mut out_of_reach = targets == TargetMode::Soft;
        if dep_in_window {
            let m = parked_until(ev.avail_end);
            let hi = (soc0 + charge * m).min(ev.capacity_max);
            let lo = (soc0 - discharged_until(ev.avail_end)).max(ev.capacity_min);
            if ev.soc_desired_departure > hi + 1e-9 || ev.soc_desired_departure < lo - 1e-9 {
                out_of_reach = true;
                diagnostics.push(Diagnostic::SoftTarget {
                    prosumer: u,
                    soc: soc0,
                    reachable_low: lo,
                    reachable_high: hi,
                    target: ev.soc_desired_departure,
                });
            }
        }
        let m_final = parked_until(t1 - 1);
        let hi_final = (soc0 + charge * m_final).min(ev.capacity_max);
        if t1 == h && ev.soc_requested_final > hi_final + 1e-9 && !out_of_reach {
            out_of_reach = true;
            diagnostics.push(Diagnostic::SoftTarget {
                prosumer: u,
                soc: soc0,
                reachable_low: soc0,
                reachable_high: hi_final,
                target: ev.soc_requested_final,
            });
        }
        let s = if out_of_reach {
            let under = dep_in_window.then(|| new_col(0.0, INF, penalty, &mut lower, &mut upper, &mut q));
            let over = dep_in_window.then(|| new_col(0.0, INF, penalty, &mut lower, &mut upper, &mut q));
            let final_under = new_col(0.0, INF, penalty, &mut lower, &mut upper, &mut q);
            let s = SoftSlack {
                under,
                over,
                final_under,
            };
            slack[u] = Some(s);
            Some(s)
        } else {
            None
        };
        if dep_in_window {
            let c = col(u, ev.avail_end - t0, Field::Soc);
            let mut terms = vec![(c, 1.0)];
            if let Some(s) = s {
                terms.push((s.under.unwrap(), 1.0));
                terms.push((s.over.unwrap(), -1.0));
            }
            let b = ev.soc_desired_departure;
            rows.push(&terms, b, b);
        }
        if t1 == h {
            target_rows.push((col(u, len - 1, Field::Soc), s.map(|s| s.final_under), ev.soc_requested_final, INF));
        }
    }
    for (c, sl, lo, hi) in target_rows {
        let mut terms = vec![(c, 1.0)];
        if let Some(s) = sl {
            terms.push((s, 1.0));
        }
        rows.push(&terms, lo, hi);
    }

    for (u, pr) in day.prosumers.iter().enumerate() {
        let ev = &pr.ev;
        for k in 0..len {
            let c = |f| col(u, k, f);
            // stored energy
            let mut terms = vec![
                (c(Field::Soc), 1.0),
                (c(Field::Evc), -ev.charge_eff * dt),
                (c(Field::Evd), dt / ev.discharge_eff),
            ];
            let rhs = if k == 0 {
                state.soc[u]
            } else {
                terms.push((col(u, k - 1, Field::Soc), -1.0));
                0.0
            };
            rows.push(&terms, rhs, rhs);
            // discharge split
            if upper[c(Field::Evd)] > 0.0 {
                rows.push(
                    &[
                        (c(Field::Evd), 1.0),
                        (c(Field::V2h), -1.0),
                        (c(Field::V2g), -1.0),
                        (c(Field::Sell), -1.0),
                    ],
                    0.0,
                    0.0,
                );
            }
            // household balance
            let load = inputs.load[u][k];
            rows.push(
                &[
                    (c(Field::Grid), 1.0),
                    (c(Field::Renew), 1.0),
                    (c(Field::Buy), 1.0),
                    (c(Field::V2h), 1.0),
                    (c(Field::Evc), -1.0),
                ],
                load,
                load,
            );
            // reserve headroom
            if upper[c(Field::As)] > 0.0 {
                rows.push(&[(c(Field::Soc), 1.0), (c(Field::As), -dt)], ev.capacity_min, INF);
                rows.push(&[(c(Field::Soc), 1.0), (c(Field::As), dt)], -INF, ev.capacity_max);
            }
            // relaxed complementarity
            for (a, b) in [(Field::Evc, Field::Evd), (Field::Buy, Field::Sell)] {
                let (ua, ub) = (upper[c(a)], upper[c(b)]);
                if ua > 0.0 && ub > 0.0 {
                    rows.push(&[(c(a), 1.0 / ua), (c(b), 1.0 / ub)], -INF, 1.0);
                }
            }
            if let Some(z) = zeta[u] {
                rows.push(&[(z, 1.0), (c(Field::Grid), -1.0)], 0.0, INF);
            }
        }
    }

    // local market clearing
    if st.trading && n > 0 {
        for k in 0..len {
            let mut terms = Vec::with_capacity(2 * n);
            for u in 0..n {
                terms.push((col(u, k, Field::Sell), 1.0));
                terms.push((col(u, k, Field::Buy), -1.0));
            }
            rows.push(&terms, 0.0, 0.0);
        }
    }

    // feeder limits, affine in the net injection of each occupied node
    let mut injection = BTreeMap::new();
    if day.settings.network_constraints && n > 0 {
        let net = &day.network;
        let mut nodes: Vec<usize> = day.prosumers.iter().map(|p| p.node).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let inflex = NetLoads {
            p: net.inflexible_p[t0..t1].to_vec(),
            q: net.inflexible_q[t0..t1].to_vec(),
        };
        let flow0 = propagate(net, &inflex)?;
        let base_kw = net.base_kw();
        let v0 = net.slack_voltage;
        let subtree: Vec<Vec<usize>> = nodes.iter().map(|&c| net.path_to_root(c)).collect();
        let lim = &net.limits;
        for k in 0..len {
            for &c in &nodes {
                let g = new_col(-INF, INF, 0.0, &mut lower, &mut upper, &mut q);
                injection.insert((c, k), g);
                let mut terms = vec![(g, 1.0)];
                for (u, pr) in day.prosumers.iter().enumerate() {
                    if pr.node == c {
                        terms.push((col(u, k, Field::Grid), -1.0));
                        terms.push((col(u, k, Field::Buy), -1.0));
                        terms.push((col(u, k, Field::Sell), 1.0));
                        terms.push((col(u, k, Field::V2g), 1.0));
                    }
                }
                rows.push(&terms, 0.0, 0.0);
            }
            for i in 1..net.num_nodes() {
                // branch i carries the injection of every node below it
                let below: Vec<usize> = nodes
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| subtree[*j].contains(&i))
                    .map(|(_, &c)| injection[&(c, k)])
                    .collect();
                if !below.is_empty() {
                    let p0 = flow0.p_flow[k][i];
                    let terms: Vec<(usize, f64)> = below.iter().map(|&g| (g, 1.0)).collect();
                    rows.push(&terms, (lim.p_min - p0) * base_kw, (lim.p_max - p0) * base_kw);
                }
            }
            for i in 1..net.num_nodes() {
                let mut terms = Vec::new();
                for &c in &nodes {
                    let (r, _) = net.shared_impedance(i, c);
                    if r > 0.0 {
                        terms.push((injection[&(c, k)], r));
                    }
                }
                if terms.is_empty() {
                    continue;
                }
                // v = v0_i - Σ r g / (base V0); row scaled to unit max coefficient
                let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.1));
                let to_row = base_kw * v0 / scale;
                for t in &mut terms {
                    t.1 /= scale;
                }
                let vb = flow0.voltage[k][i];
                rows.push(&terms, (vb - lim.v_max[i]) * to_row, (vb - lim.v_min[i]) * to_row);
            }
        }
    }

    let mut pb = TripletBuilder::new(ncols, ncols);
    for (c, v) in p_diag {
        pb.push(c, c, v);
    }
    let mut ab = rows.b;
    ab.grow_cols(ncols);
    let qp = QuadProgram {
        p: pb.build(),
        q,
        offset,
        a: ab.build(),
        row_lower: rows.lo,
        row_upper: rows.hi,
        col_lower: lower,
        col_upper: upper,
    };
    qp.validate()?;

    let mut pairs = Vec::with_capacity(2 * n * len);
    for u in 0..n {
        for k in 0..len {
            pairs.push(BinaryPair {
                prosumer: u,
                slot: t0 + k,
                kind: PairKind::Charge,
                inflow: col(u, k, Field::Evc),
                outflow: col(u, k, Field::Evd),
                bypass: None,
            });
            pairs.push(BinaryPair {
                prosumer: u,
                slot: t0 + k,
                kind: PairKind::Trade,
                inflow: col(u, k, Field::Buy),
                outflow: col(u, k, Field::Sell),
                bypass: Some(col(u, k, Field::V2h)),
            });
        }
    }
    let slot_price: Vec<f64> = (t0..t1).map(|t| tariff.energy_price(t)).collect();
    let mean_price = (0..h).map(|t| tariff.energy_price(t)).sum::<f64>() / h as f64;

    Ok(QpProblem {
        qp,
        start: t0,
        end: t1,
        prosumers: n,
        zeta,
        slack,
        pairs,
        slot_price,
        mean_price,
        injection,
        diagnostics,
    })
}
