use proptest::prelude::*;
use v2x_core::error::Error;
use v2x_core::model::*;
use v2x_core::scenario::default_ev;
use v2x_core::streams::*;

fn tariff(kind: TariffKind, tou: Vec<f64>) -> Tariff {
    Tariff {
        kind,
        tou_prices: tou,
        tpt_energy_price: 0.2,
        tpt_peak_price: 0.8,
    }
}

#[test]
fn grid_cost_examples() {
    let tou = tariff(TariffKind::Tou, vec![0.2, 0.32]);
    assert!((grid_cost(&[1.0, 1.0], &tou, 1.0).unwrap() - 0.52).abs() < 1e-12);
    let tpt = tariff(TariffKind::Tpt, vec![]);
    // 0.2 * 6 kWh + 0.8 * 4 kW
    assert!((grid_cost(&[2.0, 4.0], &tpt, 1.0).unwrap() - 4.4).abs() < 1e-12);
    assert!(grid_cost(&[-1.0], &tpt, 1.0).is_err());
    assert!(grid_cost(&[1.0, 1.0, 1.0], &tou, 1.0).is_err());
}

#[test]
fn soc_step_examples() {
    let ev = default_ev();
    let up = soc_step(20.0, 7.0, 0.0, &ev, 1.0).unwrap();
    assert!((up - (20.0 + ev.charge_eff * 7.0)).abs() < 1e-12);
    let down = soc_step(20.0, 0.0, 7.0, &ev, 1.0).unwrap();
    assert!((down - (20.0 - 7.0 / ev.discharge_eff)).abs() < 1e-12);
    assert!(matches!(soc_step(20.0, 1.0, 1.0, &ev, 1.0), Err(Error::Exclusivity(_))));
    assert!(soc_step(20.0, f64::NAN, 0.0, &ev, 1.0).is_err());
}

#[test]
fn reserve_examples() {
    let ev = default_ev();
    let (lo, hi) = reserve_soc_bounds(&ev, 2.0, 1.0).unwrap();
    assert_eq!((lo, hi), (ev.capacity_min + 2.0, ev.capacity_max - 2.0));
    assert!(matches!(
        reserve_soc_bounds(&ev, ev.capacity_max, 1.0),
        Err(Error::ReserveTooLarge { .. })
    ));
    let d = [SlotDecision {
        p_v2g: 3.0,
        p_as: 2.0,
        ..Default::default()
    }];
    assert!((v2g_revenue(&d, &[0.1], &[0.01], 1.0).unwrap() - 0.32).abs() < 1e-12);
}

#[test]
fn trading_examples() {
    assert_eq!(mid_market_rate(0.32, 0.04).unwrap(), (0.18, 0.18));
    assert!(matches!(mid_market_rate(0.02, 0.04), Err(Error::InvertedPrices { .. })));
    let both = [SlotDecision {
        p_buy: 1.0,
        p_sell: 1.0,
        ..Default::default()
    }];
    assert!(matches!(trading_cost(&both, &[0.1], &[0.1], 1.0), Err(Error::Exclusivity(_))));
    let toggle_labels: Vec<String> = [StreamToggle::ALL, StreamToggle::NONE].iter().map(|s| s.label()).collect();
    assert_eq!(toggle_labels, ["v2h+v2g+et", "none"]);
}

fn decision() -> impl Strategy<Value = SlotDecision> {
    (0.0f64..10.0, 0.0f64..5.0, 0.0f64..7.0, 0.0f64..7.0, 0.0f64..7.0, 0.0f64..7.0, any::<bool>(), any::<bool>()).prop_map(
        |(grid, renew, buy, charge, v2h, v2g, trade_out, discharge)| SlotDecision {
            p_grid: grid,
            p_renew: renew,
            p_buy: if trade_out && discharge { 0.0 } else { buy },
            p_sell: if trade_out && discharge { buy } else { 0.0 },
            p_evc: if discharge { 0.0 } else { charge },
            p_evd: if discharge { v2h + v2g + if trade_out { buy } else { 0.0 } } else { 0.0 },
            p_v2h: if discharge { v2h } else { 0.0 },
            p_v2g: if discharge { v2g } else { 0.0 },
            p_as: 0.0,
            soc: 10.0,
            x_discharge: discharge,
            y_sell: trade_out && discharge,
        },
    )
}

proptest! {
    #[test]
    fn stored_energy_never_gains_on_a_round_trip(soc in 10.0f64..40.0, p in 0.0f64..7.0) {
        let ev = default_ev();
        let up = soc_step(soc, p, 0.0, &ev, 1.0).unwrap();
        let down = soc_step(up, 0.0, p, &ev, 1.0).unwrap();
        prop_assert!(down <= soc + 1e-12);
    }

    #[test]
    fn degradation_is_a_nonnegative_quadratic(c in prop::collection::vec(0.0f64..7.0, 1..24), k in 0.0f64..3.0) {
        let d: Vec<f64> = c.iter().rev().copied().collect();
        let base = degradation_cost(&c, &d, 0.01).unwrap();
        prop_assert!(base >= 0.0);
        let scaled: Vec<f64> = c.iter().map(|v| k * v).collect();
        let sd: Vec<f64> = d.iter().map(|v| k * v).collect();
        prop_assert!((degradation_cost(&scaled, &sd, 0.01).unwrap() - k * k * base).abs() < 1e-9);
        prop_assert!((degradation_cost(&d, &c, 0.01).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn tou_cost_is_linear(p in prop::collection::vec(0.0f64..10.0, 24), k in 0.0f64..5.0) {
        let t = tariff(TariffKind::Tou, (0..24).map(|h| if (15..21).contains(&h) { 0.32 } else { 0.2 }).collect());
        let scaled: Vec<f64> = p.iter().map(|v| k * v).collect();
        let a = grid_cost(&p, &t, 1.0).unwrap();
        prop_assert!((grid_cost(&scaled, &t, 1.0).unwrap() - k * a).abs() < 1e-9);
    }

    #[test]
    fn tpt_cost_bounds(p in prop::collection::vec(0.0f64..10.0, 1..24)) {
        let t = tariff(TariffKind::Tpt, vec![]);
        let c = grid_cost(&p, &t, 1.0).unwrap();
        let energy: f64 = p.iter().sum();
        let peak = p.iter().fold(0.0f64, |m, v| m.max(*v));
        prop_assert!((c - 0.2 * energy - 0.8 * peak).abs() < 1e-9);
        // flattening the same energy can only lower the bill
        let flat = vec![energy / p.len() as f64; p.len()];
        prop_assert!(grid_cost(&flat, &t, 1.0).unwrap() <= c + 1e-9);
    }

    #[test]
    fn local_price_sits_between(retail in 0.0f64..1.0, f in 0.0f64..1.0) {
        let feed = f * retail;
        let (buy, sell) = mid_market_rate(retail, feed).unwrap();
        prop_assert_eq!(buy, sell);
        prop_assert!(feed <= buy && buy <= retail);
    }

    #[test]
    fn reserve_narrows_the_range(a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let ev = default_ev();
        let (small, large) = (a.min(b), a.max(b));
        let (l1, h1) = reserve_soc_bounds(&ev, small, 1.0).unwrap();
        let (l2, h2) = reserve_soc_bounds(&ev, large, 1.0).unwrap();
        prop_assert!(l1 <= l2 && h2 <= h1);
    }

    #[test]
    fn clearing_residual_sums_trades(ds in prop::collection::vec(decision(), 0..10)) {
        let r = market_clearing_residual(&ds);
        let sold: f64 = ds.iter().map(|d| d.p_sell).sum();
        let bought: f64 = ds.iter().map(|d| d.p_buy).sum();
        prop_assert!((r - (sold - bought)).abs() < 1e-9);
    }

    #[test]
    fn balanced_household_has_zero_residual(d in decision()) {
        let load = d.p_grid + d.p_renew + d.p_buy + d.p_v2h - d.p_evc;
        prop_assert!(home_balance_residual(&d, load).abs() < 1e-12);
        prop_assert!(d.split_residual().abs() < 1e-12);
        prop_assert!((d.net_draw() - (d.p_grid + d.p_buy - d.p_sell - d.p_v2g)).abs() < 1e-12);
    }
}
