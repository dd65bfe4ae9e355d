//! Small random days on a four-node feeder, for oracles and property tests.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{stream_rng, DayScenario, ModelSettings};
use crate::model::{EvSpec, ProsumerState, Tariff, TariffKind, TimeGrid};
use crate::network::{Branch, NetworkLimits, NetworkTopology};
use crate::streams::{mid_market_rate, MarketPrices, StreamToggle};

const TAG_TOY: u64 = 77;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyParams {
    pub prosumers: usize,
    pub slots: usize,
    pub streams: StreamToggle,
    pub tariff: TariffKind,
    /// Every EV is parked for the whole day.
    pub always_parked: bool,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            prosumers: 2,
            slots: 3,
            streams: StreamToggle::ALL,
            tariff: TariffKind::Tou,
            always_parked: false,
        }
    }
}

/// Feeder `0 - 1 - 2` with a lateral `1 - 3`, 1 MVA base, generous limits.
pub fn toy_feeder(slots: usize) -> NetworkTopology {
    let branches = [
        Branch {
            from: 0,
            to: 1,
            r_pu: 0.002,
            x_pu: 0.001,
        },
        Branch {
            from: 1,
            to: 2,
            r_pu: 0.004,
            x_pu: 0.002,
        },
        Branch {
            from: 1,
            to: 3,
            r_pu: 0.003,
            x_pu: 0.002,
        },
    ];
    let mut net = NetworkTopology::radial(&branches, 1.0, 12.66, slots).expect("toy feeder is radial");
    net.limits = NetworkLimits::uniform(4, 1.0, 0.95, 1.05);
    net
}

/// A random day seeded by `seed`.
pub fn toy_day(seed: u64, params: &ToyParams) -> DayScenario {
    let mut rng = stream_rng(seed, TAG_TOY, params.prosumers as u64, params.slots as u64);
    let h = params.slots;
    let mut net = toy_feeder(h);
    let base: Vec<f64> = vec![0.0, 20.0, 10.0, 15.0];
    let q: Vec<f64> = base.iter().map(|p| 0.5 * p).collect();
    let profile: Vec<f64> = (0..h).map(|_| rng.random_range(0.5..1.0)).collect();
    net.set_inflexible(&base, &q, &profile).expect("toy loads match the feeder");

    let tou: Vec<f64> = (0..h).map(|_| rng.random_range(0.05..0.4)).collect();
    let tariff = Tariff {
        kind: params.tariff,
        tou_prices: tou,
        tpt_energy_price: 0.2,
        tpt_peak_price: rng.random_range(0.2..1.0),
    };
    let v2g_price: Vec<f64> = (0..h).map(|t| tariff.energy_price(t) * rng.random_range(0.3..0.9)).collect();
    let reserve_price = v2g_price.iter().map(|p| 0.1 * p).collect();
    let local: Vec<f64> = (0..h)
        .map(|t| {
            let retail = tariff.energy_price(t);
            mid_market_rate(retail, 0.04f64.min(retail)).expect("ordered prices").0
        })
        .collect();

    let mut prosumers = Vec::with_capacity(params.prosumers);
    for u in 0..params.prosumers {
        let (start, end) = if params.always_parked {
            (0, h - 1)
        } else {
            let a = rng.random_range(0..h);
            (a, rng.random_range(a..h))
        };
        let soc0 = rng.random_range(4.0..12.0);
        let des = rng.random_range(6.0..16.0);
        prosumers.push(ProsumerState {
            id: u,
            node: 1 + u % 3,
            ev: EvSpec {
                capacity_max: 20.0,
                capacity_min: 2.0,
                charge_eff: 0.95,
                discharge_eff: 0.95,
                p_charge_max: 5.0,
                p_discharge_max: 5.0,
                soc_initial: soc0,
                soc_desired_departure: des,
                soc_requested_final: des * rng.random_range(0.5..1.0),
                avail_start: start,
                avail_end: end,
                parked: true,
                degradation_coeff: 0.01,
            },
            load_trace: (0..h).map(|_| rng.random_range(0.3..3.0)).collect(),
            pv_cap_trace: (0..h)
                .map(|_| if rng.random_bool(0.5) { rng.random_range(0.0..3.0) } else { 0.0 })
                .collect(),
            grid_import_cap: 10.0,
            local_buy_cap: 4.0,
            local_sell_cap: 4.0,
            v2h_cap: 4.0,
            v2g_cap: 4.0,
        });
    }
    let n = prosumers.len();
    DayScenario {
        grid: TimeGrid {
            slots_per_day: h,
            slot_hours: 1.0,
            day_index: 0,
        },
        prosumers,
        network: net,
        tariff,
        prices: MarketPrices {
            v2g_price,
            reserve_price,
            local_buy: vec![local.clone(); n],
            local_sell: vec![local; n],
        },
        streams: params.streams,
        settings: ModelSettings::default(),
    }
}
