mod common;

use v2x_core::forecast::{ForecastTarget, ForecasterKind, ForecasterSpec};
use v2x_core::optimizer::{MiqpLimits, MiqpMode};
use v2x_core::rho::*;
use v2x_core::scenario::toy::{toy_day, ToyParams};
use v2x_core::scenario::{materialize, Community, DayTraces, Scenario, ScenarioConfig};

fn fleet(seed: u64, per_community: usize, days: usize) -> Scenario {
    materialize(&ScenarioConfig {
        days,
        history_days: 1,
        seed,
        communities: vec![
            Community {
                node: 4,
                prosumers: per_community,
            },
            Community {
                node: 25,
                prosumers: per_community,
            },
        ],
        ..Default::default()
    })
    .unwrap()
}

fn branch() -> RunOptions {
    RunOptions {
        mode: MiqpMode::Branch,
        ..Default::default()
    }
}

#[test]
fn perfect_forecasts_reproduce_the_day_ahead_plan() {
    for seed in 0..4 {
        let sc = fleet(seed, 2 + seed as usize % 2, 1);
        let plan = day_ahead(&sc.days[0], MiqpMode::Branch, &MiqpLimits::default()).unwrap();
        let led = run_day(&sc, 0, &ForecasterSpec::perfect(), &branch()).unwrap();
        let tol = 1e-6 * plan.objective.abs().max(1.0);
        assert!((led.total - plan.objective).abs() <= tol, "seed {seed}: {} vs {}", led.total, plan.objective);
        assert!(common::audit(&sc.days[0], &common::traces(&sc.days[0]), &led).is_empty());
    }
}

#[test]
fn empty_day_costs_nothing() {
    let mut day = toy_day(4, &ToyParams::default());
    for p in &mut day.prosumers {
        p.load_trace.iter_mut().for_each(|v| *v = 0.0);
        p.pv_cap_trace.iter_mut().for_each(|v| *v = 0.0);
        p.ev.parked = false;
    }
    let realized = common::traces(&day);
    let led = run_day_with(&day, 0, &realized, &[], &ForecasterSpec::perfect(), &branch()).unwrap();
    assert_eq!(led.total, 0.0);
    assert!(led.events.is_empty());
    for row in &led.decisions {
        for d in row {
            assert_eq!(d.p_grid, 0.0);
            assert_eq!(d.p_evc, 0.0);
        }
    }
}

#[test]
fn windows_shrink_to_the_last_slot() {
    let day = toy_day(9, &ToyParams::default());
    let h = day.slots();
    let opts = RunOptions {
        keep_forecasts: true,
        ..branch()
    };
    let spec = ForecasterSpec::injection(0.2, 3, ForecastTarget::Both);
    let led = run_day_with(&day, 0, &common::traces(&day), &[], &spec, &opts).unwrap();
    assert_eq!(led.solves.len(), h);
    assert_eq!(led.solves.last().unwrap().slot, h - 1);
    assert_eq!(led.forecasts.len(), h - 1);
    for (t, f) in led.forecasts.iter().enumerate() {
        assert_eq!((f.origin, f.horizon), (t, h - 1 - t));
    }
    assert_eq!(led.slot_costs.len(), h);
    assert!((led.total - led.slot_costs.iter().sum::<f64>()).abs() < 1e-12);
}

#[test]
fn campaigns_of_one_and_seven_days() {
    let sc = fleet(2, 2, 7);
    let spec = ForecasterSpec::default();
    let one = run_campaign(&sc, 0..1, &spec, &RunOptions::default()).unwrap();
    let seven = run_campaign(&sc, 0..7, &spec, &RunOptions::default()).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(seven.len(), 7);
    assert_eq!(one[0], seven[0]);
    assert_eq!(totals(&seven).len(), 7);
    for (d, led) in seven.iter().enumerate() {
        assert_eq!(led.day, d);
        assert!(common::audit(&sc.days[d], &common::traces(&sc.days[d]), led).is_empty());
    }
    assert!(run_campaign(&sc, 3..3, &spec, &RunOptions::default()).is_err());
}

#[test]
fn identical_inputs_identical_ledgers() {
    let sc = fleet(5, 3, 1);
    let spec = ForecasterSpec::injection(0.3, 17, ForecastTarget::Load);
    let a = run_day(&sc, 0, &spec, &RunOptions::default()).unwrap();
    let b = run_day(&sc, 0, &spec, &RunOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decisions_ignore_the_unrevealed_future() {
    // persistence only reads the value at the origin, so rewriting every
    // slot after t must leave slots 0..=t untouched
    let day = toy_day(21, &ToyParams {
        prosumers: 2,
        slots: 5,
        ..Default::default()
    });
    let spec = ForecasterSpec {
        kind: ForecasterKind::Persistence,
        ..Default::default()
    };
    let realized = common::traces(&day);
    let base = run_day_with(&day, 0, &realized, &[], &spec, &branch()).unwrap();
    for t in 0..day.slots() - 1 {
        let mut altered: DayTraces = realized.clone();
        for u in 0..2 {
            for s in t + 1..day.slots() {
                altered.load[u][s] = 7.0 + s as f64;
                altered.pv[u][s] = 0.5;
            }
        }
        let led = run_day_with(&day, 0, &altered, &[], &spec, &branch()).unwrap();
        for u in 0..2 {
            assert_eq!(led.decisions[u][..=t], base.decisions[u][..=t], "slot {t} saw the future");
        }
    }
}

#[test]
fn stored_energy_carries_across_slots() {
    for seed in 0..6 {
        let day = toy_day(seed, &ToyParams {
            prosumers: 3,
            slots: 6,
            ..Default::default()
        });
        let spec = ForecasterSpec::injection(0.4, seed, ForecastTarget::Both);
        let led = run_day_with(&day, 0, &common::traces(&day), &[], &spec, &RunOptions::default()).unwrap();
        for (u, p) in day.prosumers.iter().enumerate() {
            let ev = &p.ev;
            let mut soc = ev.soc_initial;
            for d in &led.decisions[u] {
                soc += ev.charge_eff * d.p_evc - d.p_evd / ev.discharge_eff;
                assert!((soc - d.soc).abs() < 1e-6);
                soc = d.soc;
            }
        }
        assert!(common::audit(&day, &common::traces(&day), &led).is_empty(), "seed {seed}");
    }
}

#[test]
fn ev_windows_follow_the_parked_interval() {
    let day = toy_day(2, &ToyParams {
        prosumers: 3,
        slots: 6,
        ..Default::default()
    });
    let w = ev_windows(&day);
    for (p, &(a, b)) in day.prosumers.iter().zip(&w) {
        assert_eq!((a, b), (p.ev.avail_start, p.ev.avail_end));
    }
}
