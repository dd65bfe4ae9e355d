//! Oracles and audits shared by the integration tests.
#![allow(dead_code)]

use clarabel::algebra::CscMatrix as ConicMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use v2x_core::model::{home_balance_residual, SlotDecision};
use v2x_core::optimizer::{Field, QpProblem};
use v2x_core::qp::QuadProgram;
use v2x_core::rho::{Event, RunLedger};
use v2x_core::scenario::{DayScenario, DayTraces};
use v2x_core::streams::market_clearing_residual;

/// Solve `qp` with the Clarabel conic interior-point solver. `None` when it
/// reports infeasibility.
pub fn conic_solve(qp: &QuadProgram) -> Option<(f64, Vec<f64>)> {
    let n = qp.num_vars();
    let rows = dense_rows(qp);
    let mut eq: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut le: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut add = |terms: Vec<(usize, f64)>, lo: f64, hi: f64| {
        if lo == hi {
            eq.push((terms, hi));
            return;
        }
        if hi < 1e20 {
            le.push((terms.clone(), hi));
        }
        if lo > -1e20 {
            le.push((terms.iter().map(|&(j, v)| (j, -v)).collect(), -lo));
        }
    };
    for (i, terms) in rows.into_iter().enumerate() {
        add(terms, qp.row_lower[i], qp.row_upper[i]);
    }
    for j in 0..n {
        add(vec![(j, 1.0)], qp.col_lower[j], qp.col_upper[j]);
    }
    let m = eq.len() + le.len();
    let (mut ii, mut jj, mut vv, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (r, (terms, rhs)) in eq.iter().chain(le.iter()).enumerate() {
        for &(j, v) in terms {
            ii.push(r);
            jj.push(j);
            vv.push(v);
        }
        b.push(*rhs);
    }
    let a = ConicMatrix::new_from_triplets(m, n, ii, jj, vv);
    let p = ConicMatrix::new(
        n,
        n,
        qp.p.colptr.clone(),
        qp.p.rowind.clone(),
        qp.p.values.clone(),
    );
    let cones = [SupportedConeT::ZeroConeT(eq.len()), SupportedConeT::NonnegativeConeT(le.len())];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .max_iter(500)
        .build()
        .unwrap();
    let mut solver = DefaultSolver::new(&p, &qp.q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let x = solver.solution.x.clone();
            Some((qp.objective(&x), x))
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => None,
        s => panic!("conic oracle did not converge: {s:?}"),
    }
}

fn dense_rows(qp: &QuadProgram) -> Vec<Vec<(usize, f64)>> {
    let mut rows = vec![Vec::new(); qp.num_rows()];
    for (i, j, v) in qp.a.triplets() {
        rows[i].push((j, v));
    }
    rows
}

/// Exhaustive search over every binary assignment: each pair whose members
/// can both be positive is split into "inflow zero" and "outflow zero", and
/// each leaf is solved by the conic oracle. Returns the best objective and
/// the number of leaves.
pub fn enumerate_binaries(problem: &QpProblem) -> (Option<f64>, usize) {
    let qp = &problem.qp;
    let live: Vec<(usize, usize)> = problem
        .pairs
        .iter()
        .filter(|p| qp.col_upper[p.inflow] > 0.0 && qp.col_upper[p.outflow] > 0.0)
        .map(|p| (p.inflow, p.outflow))
        .collect();
    assert!(live.len() <= 16, "enumeration over {} pairs is too large", live.len());
    let mut best: Option<f64> = None;
    let leaves = 1usize << live.len();
    for mask in 0..leaves {
        let mut fixed = qp.clone();
        for (b, &(a, o)) in live.iter().enumerate() {
            let c = if mask >> b & 1 == 0 { a } else { o };
            fixed.col_lower[c] = 0.0;
            fixed.col_upper[c] = 0.0;
        }
        if let Some((obj, _)) = conic_solve(&fixed) {
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    (best, leaves)
}

/// Number of pairs whose members can both be positive.
pub fn live_pairs(problem: &QpProblem) -> usize {
    let qp = &problem.qp;
    problem
        .pairs
        .iter()
        .filter(|p| qp.col_upper[p.inflow] > 0.0 && qp.col_upper[p.outflow] > 0.0)
        .count()
}

/// Whether every pair in `x` has at most one active member.
pub fn complementary(problem: &QpProblem, x: &[f64]) -> bool {
    problem
        .pairs
        .iter()
        .all(|p| x[p.inflow] <= 1e-6 || x[p.outflow] <= 1e-6)
}

pub fn field(problem: &QpProblem, x: &[f64], u: usize, k: usize, f: Field) -> f64 {
    x[problem.col(u, k, f)]
}

/// Every executed slot of `ledger` checked against the household balance,
/// market clearing, stored-energy and reserve bounds, the departure target
/// and the feeder limits. Returns the violations that no event explains.
pub fn audit(day: &DayScenario, realized: &DayTraces, ledger: &RunLedger) -> Vec<String> {
    const TOL: f64 = 1e-6;
    let mut out = Vec::new();
    let h = day.slots();
    let dt = day.grid.slot_hours;
    let explained = |u: usize, t: usize| {
        ledger.events.iter().any(|e| match e {
            Event::Shortfall { prosumer, slot, .. } | Event::Spill { prosumer, slot, .. } => {
                *prosumer == u && *slot == t
            }
            _ => false,
        })
    };
    let soft = |u: usize| {
        ledger.events.iter().any(|e| {
            matches!(e, Event::SoftTarget { prosumer, .. } | Event::MissedTarget { prosumer, .. } if *prosumer == u)
        })
    };
    for t in 0..h {
        let slot: Vec<&SlotDecision> = ledger.decisions.iter().map(|r| &r[t]).collect();
        let r = market_clearing_residual(slot.iter().copied());
        if r.abs() > TOL {
            out.push(format!("slot {t}: market clearing residual {r:e}"));
        }
    }
    for (u, pr) in day.prosumers.iter().enumerate() {
        let ev = &pr.ev;
        let mut soc = ev.soc_initial;
        for t in 0..h {
            let d = &ledger.decisions[u][t];
            let res = home_balance_residual(d, realized.load[u][t]);
            if res.abs() > TOL && !explained(u, t) {
                out.push(format!("prosumer {u} slot {t}: balance residual {res:e}"));
            }
            if d.p_renew > realized.pv[u][t] + TOL {
                out.push(format!("prosumer {u} slot {t}: PV used above availability"));
            }
            if d.p_evc > TOL && d.p_evd > TOL {
                out.push(format!("prosumer {u} slot {t}: simultaneous charge and discharge"));
            }
            if d.p_buy > TOL && d.p_sell > TOL {
                out.push(format!("prosumer {u} slot {t}: simultaneous buy and sell"));
            }
            let split = d.p_evd - d.p_v2h - d.p_v2g - d.p_sell;
            if split.abs() > TOL {
                out.push(format!("prosumer {u} slot {t}: discharge split residual {split:e}"));
            }
            if !ev.is_parked(t) && (d.p_evc > TOL || d.p_evd > TOL || d.p_as > TOL) {
                out.push(format!("prosumer {u} slot {t}: EV used while away"));
            }
            soc += ev.charge_eff * d.p_evc * dt - d.p_evd * dt / ev.discharge_eff;
            if (soc - d.soc).abs() > 1e-5 {
                out.push(format!("prosumer {u} slot {t}: stored energy {} does not follow {soc}", d.soc));
            }
            soc = d.soc;
            let (lo, hi) = (ev.capacity_min + d.p_as * dt, ev.capacity_max - d.p_as * dt);
            if d.soc < lo - 1e-5 || d.soc > hi + 1e-5 {
                out.push(format!("prosumer {u} slot {t}: stored energy {} outside [{lo}, {hi}]", d.soc));
            }
            if ev.parked && t == ev.avail_end && (d.soc - ev.soc_desired_departure).abs() > 1e-5 && !soft(u) {
                out.push(format!("prosumer {u}: departure energy {} misses {}", d.soc, ev.soc_desired_departure));
            }
        }
    }
    for e in &ledger.events {
        if let Event::Network(v) = e {
            out.push(format!("network: {v:?}"));
        }
        if let Event::Fallback { slot, reason } = e {
            out.push(format!("slot {slot}: fallback ({reason})"));
        }
    }
    out
}

/// Realized traces of a day, as the engine sees them.
pub fn traces(day: &DayScenario) -> DayTraces {
    DayTraces {
        load: day.prosumers.iter().map(|p| p.load_trace.clone()).collect(),
        pv: day.prosumers.iter().map(|p| p.pv_cap_trace.clone()).collect(),
    }
}

/// Relative extra cost written out from its definition: absolute cost gaps
/// over every prosumer's parking window, divided by the perfect-forecast
/// cost of the same slots.
pub fn rec_by_definition(day: &DayScenario, predicted: &RunLedger, perfect: &RunLedger) -> (f64, f64) {
    let mut gap = 0.0;
    let mut base = 0.0;
    for (u, p) in day.prosumers.iter().enumerate() {
        for t in p.ev.avail_start..=p.ev.avail_end {
            let a = predicted.costs[u][t].total();
            let c = perfect.costs[u][t].total();
            gap += (a - c).abs();
            base += c;
        }
    }
    (gap, base)
}

/// Relative RMS forecast error written out from its definition, using every
/// stored forecast whose target falls inside the parking window.
pub fn re_by_definition(day: &DayScenario, realized: &DayTraces, ledger: &RunLedger, pv: bool) -> (f64, f64) {
    let mut err = 0.0;
    let mut mag = 0.0;
    for f in &ledger.forecasts {
        for (u, p) in day.prosumers.iter().enumerate() {
            for k in 0..f.horizon {
                let t = f.origin + 1 + k;
                if t < p.ev.avail_start || t > p.ev.avail_end {
                    continue;
                }
                let (guess, real) = if pv {
                    (f.pv[u][k], realized.pv[u][t])
                } else {
                    (f.load[u][k], realized.load[u][t])
                };
                err += (guess - real) * (guess - real);
                mag += real * real;
            }
        }
    }
    (err, mag)
}
