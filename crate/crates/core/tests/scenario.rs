use v2x_core::model::TariffKind;
use v2x_core::scenario::toy::{toy_day, ToyParams};
use v2x_core::scenario::*;
use v2x_core::streams::StreamToggle;

fn small(days: usize) -> ScenarioConfig {
    ScenarioConfig {
        days,
        history_days: 2,
        ..Default::default()
    }
}

#[test]
fn config_survives_json() {
    let cfg = ScenarioConfig {
        tariff: TariffKind::Tpt,
        market: MarketKind::Isone,
        seed: 99,
        ..small(2)
    };
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    // omitted fields fall back to defaults
    let partial: ScenarioConfig = serde_json::from_str(r#"{"days": 3, "tariff": "tpt"}"#).unwrap();
    assert_eq!(partial.days, 3);
    assert_eq!(partial.communities, ScenarioConfig::default().communities);
}

#[test]
fn materialized_scenario_survives_json() {
    let sc = materialize(&small(1)).unwrap();
    let text = serde_json::to_string(&sc).unwrap();
    let back: Scenario = serde_json::from_str(&text).unwrap();
    assert_eq!(back, sc);
    let day = toy_day(1, &ToyParams::default());
    let back: DayScenario = serde_json::from_str(&serde_json::to_string(&day).unwrap()).unwrap();
    assert_eq!(back, day);
}

#[test]
fn same_seed_same_scenario() {
    assert_eq!(materialize(&small(2)).unwrap(), materialize(&small(2)).unwrap());
    let other = materialize(&ScenarioConfig { seed: 2, ..small(2) }).unwrap();
    assert_ne!(other.days[0].prosumers, materialize(&small(2)).unwrap().days[0].prosumers);
}

#[test]
fn tariff_and_market_leave_the_data_alone() {
    let base = materialize(&small(2)).unwrap();
    for (tariff, market) in [(TariffKind::Tpt, MarketKind::Nem), (TariffKind::Tou, MarketKind::Nyiso)] {
        let cfg = ScenarioConfig {
            tariff,
            market,
            streams: StreamToggle::NONE,
            ..small(2)
        };
        let sc = materialize(&cfg).unwrap();
        assert_eq!(sc.history, base.history);
        for (a, b) in sc.days.iter().zip(&base.days) {
            assert_eq!(a.prosumers, b.prosumers);
            assert_eq!(a.network, b.network);
        }
    }
}

#[test]
fn default_fleet_shape() {
    let sc = materialize(&small(3)).unwrap();
    assert_eq!(sc.days.len(), 3);
    assert_eq!(sc.history.len(), 2);
    for day in &sc.days {
        day.validate().unwrap();
        assert_eq!(day.prosumers.len(), 60);
        assert_eq!(day.slots(), 24);
        for (i, node) in [4, 25, 32].into_iter().enumerate() {
            assert!(day.prosumers[20 * i..20 * (i + 1)].iter().all(|p| p.node == node));
        }
        for p in &day.prosumers {
            // arrival 18:00 +- 2 h and departure 08:00 +- 2 h on a noon-start day
            assert!((4..=8).contains(&p.ev.avail_start), "{}", p.ev.avail_start);
            assert!((17..=21).contains(&p.ev.avail_end), "{}", p.ev.avail_end);
            assert!(p.load_trace.iter().all(|v| *v >= 0.0));
            assert!(p.pv_cap_trace[12..18].iter().all(|v| *v == 0.0), "PV at night");
        }
        // local prices sit halfway between retail and the feed-in rate
        for t in 0..24 {
            let retail = day.tariff.energy_price(t);
            let mid = 0.5 * (retail + 0.04f64.min(retail));
            assert!((day.prices.local_buy[0][t] - mid).abs() < 1e-12);
        }
    }
    assert_ne!(sc.days[0].prosumers[0].load_trace, sc.days[1].prosumers[0].load_trace);
    assert_eq!(sc.past_traces(0, 1).unwrap(), sc.history[1]);
}

#[test]
fn bad_configs_are_rejected() {
    let bad = [
        ScenarioConfig { days: 0, ..small(1) },
        ScenarioConfig {
            slots_per_day: 23,
            ..small(1)
        },
        ScenarioConfig {
            topology: "ieee999".into(),
            ..small(1)
        },
        ScenarioConfig {
            communities: vec![Community { node: 40, prosumers: 1 }],
            ..small(1)
        },
    ];
    for cfg in bad {
        assert!(materialize(&cfg).is_err(), "{cfg:?}");
    }
}
