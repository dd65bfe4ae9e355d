//! Experiment configuration and deterministic scenario materialization.
//!
//! The operational day starts at `day_start_hour` (12:00 by default) so that
//! an overnight parking window is one contiguous slot range. With hourly
//! slots, slot 0 is 12:00-13:00, slot 6 starts at 18:00 and slot 19 is
//! 07:00-08:00.
//!
//! Every random draw comes from a ChaCha stream keyed by the config seed and
//! a fixed tag, so changing the tariff, market or enabled streams never
//! changes the fleet, loads or PV.

pub mod synthetic;
pub mod toy;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::ForecasterSpec;
use crate::model::{EvSpec, ProsumerState, Tariff, TariffKind, TimeGrid};
use crate::network::{ieee33, ieee33_nodal_loads, NetworkLimits, NetworkTopology};
use crate::streams::{mid_market_rate, MarketPrices, StreamToggle, DEFAULT_FEED_IN, DEFAULT_RESERVE_RATIO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketKind {
    Nem,
    Isone,
    Nyiso,
}

impl MarketKind {
    pub const ALL: [MarketKind; 3] = [MarketKind::Nem, MarketKind::Isone, MarketKind::Nyiso];

    pub fn name(&self) -> &'static str {
        match self {
            MarketKind::Nem => "nem",
            MarketKind::Isone => "isone",
            MarketKind::Nyiso => "nyiso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Community {
    pub node: usize,
    pub prosumers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetParams {
    pub capacity_kwh: f64,
    pub capacity_min_kwh: f64,
    pub charge_max_kw: f64,
    pub discharge_max_kw: f64,
    pub charge_eff: f64,
    pub discharge_eff: f64,
    pub soc_initial_range: (f64, f64),
    pub soc_desired_departure: f64,
    /// Defaults to the departure target.
    pub soc_requested_final: Option<f64>,
    pub arrival_hour: f64,
    pub departure_hour: f64,
    /// Arrival and departure are shifted by a whole number of hours drawn
    /// uniformly from `[-jitter, jitter]`.
    pub jitter_hours: u32,
    pub degradation_coeff: f64,
    pub grid_import_cap: f64,
    pub local_buy_cap: f64,
    pub local_sell_cap: f64,
    pub v2h_cap: f64,
    pub v2g_cap: f64,
    pub pv_peak_range: (f64, f64),
}

impl Default for FleetParams {
    fn default() -> Self {
        Self {
            capacity_kwh: 50.0,
            capacity_min_kwh: 5.0,
            charge_max_kw: 7.0,
            discharge_max_kw: 7.0,
            charge_eff: 0.95,
            discharge_eff: 0.95,
            soc_initial_range: (20.0, 30.0),
            soc_desired_departure: 40.0,
            soc_requested_final: None,
            arrival_hour: 18.0,
            departure_hour: 8.0,
            jitter_hours: 2,
            degradation_coeff: 0.01,
            grid_import_cap: 15.0,
            local_buy_cap: 7.0,
            local_sell_cap: 7.0,
            v2h_cap: 7.0,
            v2g_cap: 7.0,
            pv_peak_range: (3.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    /// Multiplier on the feeder's nodal loads at the daily inflexible peak.
    pub inflexible_scale: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Symmetric branch flow limit, per unit.
    pub flow_limit_pu: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            inflexible_scale: 0.5,
            v_min: 0.95,
            v_max: 1.05,
            flow_limit_pu: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceParams {
    pub tpt_energy_price: f64,
    pub tpt_peak_price: f64,
    pub feed_in: f64,
    pub reserve_ratio: f64,
}

impl Default for PriceParams {
    fn default() -> Self {
        Self {
            tpt_energy_price: 0.2,
            tpt_peak_price: 0.8,
            feed_in: DEFAULT_FEED_IN,
            reserve_ratio: DEFAULT_RESERVE_RATIO,
        }
    }
}

/// Options that shape the optimization problem rather than the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    /// $/kWh charged on missed departure energy when the target is out of
    /// reach.
    pub departure_penalty: f64,
    pub network_constraints: bool,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            departure_penalty: 10.0,
            network_constraints: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Built-in topology name; file-based topologies are resolved by callers.
    pub topology: String,
    pub communities: Vec<Community>,
    pub fleet: FleetParams,
    pub tariff: TariffKind,
    pub market: MarketKind,
    pub streams: StreamToggle,
    pub forecaster: ForecasterSpec,
    pub days: usize,
    /// Days generated before day 0 for forecaster lookback.
    pub history_days: usize,
    /// Day of week of day 0, Monday = 0.
    pub first_weekday: usize,
    pub seed: u64,
    pub slots_per_day: usize,
    pub slot_hours: f64,
    pub day_start_hour: f64,
    pub network: NetworkParams,
    pub prices: PriceParams,
    pub settings: ModelSettings,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            topology: "ieee33".into(),
            communities: [4, 25, 32]
                .iter()
                .map(|&node| Community { node, prosumers: 20 })
                .collect(),
            fleet: FleetParams::default(),
            tariff: TariffKind::Tou,
            market: MarketKind::Nem,
            streams: StreamToggle::ALL,
            forecaster: ForecasterSpec::default(),
            days: 7,
            history_days: 7,
            first_weekday: 0,
            seed: 1,
            slots_per_day: 24,
            slot_hours: 1.0,
            day_start_hour: 12.0,
            network: NetworkParams::default(),
            prices: PriceParams::default(),
            settings: ModelSettings::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        TimeGrid {
            slots_per_day: self.slots_per_day,
            slot_hours: self.slot_hours,
            day_index: 0,
        }
        .validate()?;
        let f = &self.fleet;
        if f.soc_initial_range.0 > f.soc_initial_range.1 {
            return Err(Error::InvalidParameter("soc_initial_range is reversed".into()));
        }
        if f.pv_peak_range.0 > f.pv_peak_range.1 || f.pv_peak_range.0 < 0.0 {
            return Err(Error::InvalidParameter("pv_peak_range must be an ordered nonnegative pair".into()));
        }
        if f.jitter_hours >= 12 {
            return Err(Error::InvalidParameter("jitter_hours must be below 12".into()));
        }
        if self.prices.reserve_ratio < 0.0 || self.prices.feed_in < 0.0 {
            return Err(Error::InvalidParameter("price parameters must be nonnegative".into()));
        }
        if self.days == 0 {
            return Err(Error::InvalidParameter("at least one day is required".into()));
        }
        if (self.slots_per_day as f64 * self.slot_hours - 24.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("slots must tile exactly 24 hours".into()));
        }
        self.forecaster.validate()
    }
}

/// Everything the optimizer needs for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayScenario {
    pub grid: TimeGrid,
    pub prosumers: Vec<ProsumerState>,
    pub network: NetworkTopology,
    pub tariff: Tariff,
    pub prices: MarketPrices,
    pub streams: StreamToggle,
    pub settings: ModelSettings,
}

impl DayScenario {
    pub fn validate(&self) -> Result<()> {
        let h = self.grid.slots_per_day;
        self.grid.validate()?;
        self.network.validate()?;
        if self.network.num_slots() != h {
            return Err(Error::Dimension("inflexible load must cover the day"));
        }
        self.tariff.validate(h)?;
        self.prices.validate(self.prosumers.len(), h)?;
        for p in &self.prosumers {
            p.validate(h)?;
            if p.node >= self.network.num_nodes() {
                return Err(Error::UnknownNode(p.node));
            }
        }
        Ok(())
    }

    pub fn slots(&self) -> usize {
        self.grid.slots_per_day
    }

    /// Copy with a different set of enabled streams.
    pub fn with_streams(&self, streams: StreamToggle) -> Self {
        Self {
            streams,
            ..self.clone()
        }
    }
}

/// Realized load and PV of one day, `[prosumer][slot]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTraces {
    pub load: Vec<Vec<f64>>,
    pub pv: Vec<Vec<f64>>,
}

/// Declared modeling assumptions, echoed into run summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumptions {
    pub day_start_hour: f64,
    pub arrival_hour: f64,
    pub departure_hour: f64,
    pub jitter_hours: u32,
    pub inflexible_scale: f64,
    pub reserve_ratio: f64,
    pub feed_in: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub days: Vec<DayScenario>,
    /// Days before day 0, oldest first.
    pub history: Vec<DayTraces>,
    pub assumptions: Assumptions,
}

impl Scenario {
    /// Realized traces of the day `lag` days before `day` (lag 1 = previous
    /// day), reaching into the warm-up history when needed.
    pub fn past_traces(&self, day: usize, lag: usize) -> Option<DayTraces> {
        if lag == 0 {
            return None;
        }
        if lag <= day {
            let d = &self.days[day - lag];
            return Some(DayTraces {
                load: d.prosumers.iter().map(|p| p.load_trace.clone()).collect(),
                pv: d.prosumers.iter().map(|p| p.pv_cap_trace.clone()).collect(),
            });
        }
        let back = lag - day;
        self.history.len().checked_sub(back).map(|i| self.history[i].clone())
    }

    pub fn with_streams(&self, streams: StreamToggle) -> Self {
        Self {
            days: self.days.iter().map(|d| d.with_streams(streams)).collect(),
            ..self.clone()
        }
    }

    pub fn num_prosumers(&self) -> usize {
        self.days.first().map_or(0, |d| d.prosumers.len())
    }
}

/// EV defaults used when no configuration is given.
pub fn default_ev() -> EvSpec {
    let f = FleetParams::default();
    EvSpec {
        capacity_max: f.capacity_kwh,
        capacity_min: f.capacity_min_kwh,
        charge_eff: f.charge_eff,
        discharge_eff: f.discharge_eff,
        p_charge_max: f.charge_max_kw,
        p_discharge_max: f.discharge_max_kw,
        soc_initial: 25.0,
        soc_desired_departure: f.soc_desired_departure,
        soc_requested_final: f.soc_desired_departure,
        avail_start: 6,
        avail_end: 19,
        parked: true,
        degradation_coeff: f.degradation_coeff,
    }
}

const TAG_FLEET: u64 = 1;
const TAG_DAY: u64 = 2;
const TAG_PRICE: u64 = 3;
const TAG_WEATHER: u64 = 4;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG stream for `(seed, tag, a, b)`.
pub fn stream_rng(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed ^ mix(tag)) ^ a) ^ b))
}

/// Slot whose start is `hour` on the clock.
fn slot_of_hour(hour: f64, day_start: f64, slot_hours: f64, slots: usize) -> usize {
    let rel = synthetic::wrap_hour(hour - day_start);
    (libm::round(rel / slot_hours) as usize).min(slots - 1)
}

/// Built-in topology by name.
pub fn builtin_topology(name: &str, slots: usize) -> Result<NetworkTopology> {
    match name {
        "ieee33" => Ok(ieee33(slots)),
        other => Err(Error::InvalidParameter(alloc::format!("unknown built-in topology '{other}'"))),
    }
}

/// Materialize a scenario on the named built-in topology.
pub fn materialize(config: &ScenarioConfig) -> Result<Scenario> {
    let topo = builtin_topology(&config.topology, config.slots_per_day)?;
    let (p, q) = if config.topology == "ieee33" {
        ieee33_nodal_loads()
    } else {
        unreachable!()
    };
    materialize_on(config, topo, &p, &q)
}

struct Household {
    node: usize,
    shape: synthetic::HouseholdShape,
    pv_peak: f64,
}

/// Materialize a scenario on a given feeder whose nodal base loads are
/// `base_p` (kW) and `base_q` (kvar).
pub fn materialize_on(
    config: &ScenarioConfig,
    mut network: NetworkTopology,
    base_p: &[f64],
    base_q: &[f64],
) -> Result<Scenario> {
    config.validate()?;
    let h = config.slots_per_day;
    let dt = config.slot_hours;
    let n_nodes = network.num_nodes();
    for c in &config.communities {
        if c.node >= n_nodes {
            return Err(Error::UnknownNode(c.node));
        }
    }
    let hours = synthetic::clock_hours(h, dt, config.day_start_hour);
    let profile: Vec<f64> = hours
        .iter()
        .map(|&hr| config.network.inflexible_scale * synthetic::inflexible_shape(hr + 0.5 * dt))
        .collect();
    network.set_inflexible(base_p, base_q, &profile)?;
    let np = &config.network;
    network.limits = NetworkLimits::uniform(n_nodes, np.flow_limit_pu, np.v_min, np.v_max);
    network.community_nodes = config.communities.iter().map(|c| c.node).collect();
    network.validate()?;

    let f = &config.fleet;
    let mut fleet_rng = stream_rng(config.seed, TAG_FLEET, 0, 0);
    let mut houses = Vec::new();
    for c in &config.communities {
        for _ in 0..c.prosumers {
            houses.push(Household {
                node: c.node,
                shape: synthetic::HouseholdShape::draw(&mut fleet_rng),
                pv_peak: fleet_rng.random_range(f.pv_peak_range.0..=f.pv_peak_range.1),
            });
        }
    }

    let total_days = config.history_days + config.days;
    let mut traces = Vec::with_capacity(total_days);
    for abs_day in 0..total_days {
        let weekday = (config.first_weekday + 7 * total_days + abs_day - config.history_days) % 7;
        let weekend = weekday >= 5;
        let mut weather = stream_rng(config.seed, TAG_WEATHER, abs_day as u64, 0);
        let cloud: f64 = weather.random_range(0.45..1.0);
        let mut load = Vec::with_capacity(houses.len());
        let mut pv = Vec::with_capacity(houses.len());
        for (u, house) in houses.iter().enumerate() {
            let mut rng = stream_rng(config.seed, TAG_DAY, abs_day as u64, u as u64);
            load.push(synthetic::household_load(&house.shape, &hours, dt, weekend, &mut rng));
            let local_cloud = (cloud * rng.random_range(0.9..1.1)).min(1.0);
            pv.push(synthetic::pv_output(house.pv_peak, local_cloud, &hours, dt, &mut rng));
        }
        traces.push(DayTraces { load, pv });
    }
    let history: Vec<DayTraces> = traces.drain(..config.history_days).collect();

    let mut days = Vec::with_capacity(config.days);
    for (d, tr) in traces.into_iter().enumerate() {
        let abs_day = (d + config.history_days) as u64;
        let grid = TimeGrid {
            slots_per_day: h,
            slot_hours: dt,
            day_index: d,
        };
        let tariff = Tariff {
            kind: config.tariff,
            tou_prices: hours
                .iter()
                .map(|&hr| synthetic::tou_price(config.market, hr))
                .collect(),
            tpt_energy_price: config.prices.tpt_energy_price,
            tpt_peak_price: config.prices.tpt_peak_price,
        };
        let mut price_rng = stream_rng(config.seed, TAG_PRICE, abs_day, config.market as u64);
        let v2g_price = synthetic::wholesale_prices(config.market, &hours, dt, &mut price_rng);
        let reserve_price = v2g_price.iter().map(|p| p * config.prices.reserve_ratio).collect();
        let mut local = Vec::with_capacity(h);
        for t in 0..h {
            let retail = tariff.energy_price(t);
            local.push(mid_market_rate(retail, config.prices.feed_in.min(retail))?.0);
        }
        let prices = MarketPrices {
            v2g_price,
            reserve_price,
            local_buy: vec![local.clone(); houses.len()],
            local_sell: vec![local; houses.len()],
        };

        let mut prosumers = Vec::with_capacity(houses.len());
        for (u, house) in houses.iter().enumerate() {
            let mut rng = stream_rng(config.seed, TAG_FLEET, abs_day + 1, u as u64);
            let j = f.jitter_hours as i64;
            let arrive = f.arrival_hour + rng.random_range(-j..=j) as f64;
            let depart = f.departure_hour + rng.random_range(-j..=j) as f64;
            let start = slot_of_hour(arrive, config.day_start_hour, dt, h);
            let end = slot_of_hour(depart - dt, config.day_start_hour, dt, h);
            let soc0 = rng.random_range(f.soc_initial_range.0..=f.soc_initial_range.1);
            let ev = EvSpec {
                capacity_max: f.capacity_kwh,
                capacity_min: f.capacity_min_kwh,
                charge_eff: f.charge_eff,
                discharge_eff: f.discharge_eff,
                p_charge_max: f.charge_max_kw,
                p_discharge_max: f.discharge_max_kw,
                soc_initial: soc0,
                soc_desired_departure: f.soc_desired_departure,
                soc_requested_final: f.soc_requested_final.unwrap_or(f.soc_desired_departure),
                avail_start: start.min(end),
                avail_end: end.max(start),
                parked: true,
                degradation_coeff: f.degradation_coeff,
            };
            prosumers.push(ProsumerState {
                id: u,
                node: house.node,
                ev,
                load_trace: tr.load[u].clone(),
                pv_cap_trace: tr.pv[u].clone(),
                grid_import_cap: f.grid_import_cap,
                local_buy_cap: f.local_buy_cap,
                local_sell_cap: f.local_sell_cap,
                v2h_cap: f.v2h_cap,
                v2g_cap: f.v2g_cap,
            });
        }
        let day = DayScenario {
            grid,
            prosumers,
            network: network.clone(),
            tariff,
            prices,
            streams: config.streams,
            settings: config.settings,
        };
        day.validate()?;
        days.push(day);
    }

    Ok(Scenario {
        days,
        history,
        assumptions: Assumptions {
            day_start_hour: config.day_start_hour,
            arrival_hour: f.arrival_hour,
            departure_hour: f.departure_hour,
            jitter_hours: f.jitter_hours,
            inflexible_scale: config.network.inflexible_scale,
            reserve_ratio: config.prices.reserve_ratio,
            feed_in: config.prices.feed_in,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_has_sixty_prosumers() {
        let s = materialize(&ScenarioConfig::default()).unwrap();
        let day = &s.days[0];
        assert_eq!(day.prosumers.len(), 60);
        for node in [4, 25, 32] {
            assert_eq!(day.prosumers.iter().filter(|p| p.node == node).count(), 20);
        }
        for p in &day.prosumers {
            assert!((20.0..=30.0).contains(&p.ev.soc_initial));
            assert!((4..=8).contains(&p.ev.avail_start));
            assert!((17..=21).contains(&p.ev.avail_end));
        }
    }

    #[test]
    fn empty_fleet() {
        let cfg = ScenarioConfig {
            communities: vec![Community { node: 4, prosumers: 0 }],
            ..Default::default()
        };
        let s = materialize(&cfg).unwrap();
        assert!(s.days.iter().all(|d| d.prosumers.is_empty()));
    }

    #[test]
    fn same_seed_same_scenario() {
        let cfg = ScenarioConfig {
            days: 2,
            ..Default::default()
        };
        assert_eq!(materialize(&cfg).unwrap(), materialize(&cfg).unwrap());
    }

    #[test]
    fn tariff_choice_does_not_move_the_fleet() {
        let a = materialize(&ScenarioConfig::default()).unwrap();
        let b = materialize(&ScenarioConfig {
            tariff: TariffKind::Tpt,
            market: MarketKind::Isone,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a.days[3].prosumers, b.days[3].prosumers);
    }

    #[test]
    fn unknown_node_is_rejected() {
        let cfg = ScenarioConfig {
            communities: vec![Community { node: 40, prosumers: 1 }],
            ..Default::default()
        };
        assert!(matches!(materialize(&cfg), Err(Error::UnknownNode(40))));
    }

    #[test]
    fn inflexible_load_alone_is_within_limits() {
        use crate::network::{check_limits, net_loads, propagate};
        let s = materialize(&ScenarioConfig {
            days: 1,
            ..Default::default()
        })
        .unwrap();
        let day = &s.days[0];
        let idle = vec![vec![crate::model::SlotDecision::default(); 24]; day.prosumers.len()];
        let loads = net_loads(&day.network, &day.prosumers, &idle).unwrap();
        let flow = propagate(&day.network, &loads).unwrap();
        assert!(check_limits(&flow, &day.network).is_empty());
        let vmin = flow.voltage.iter().flatten().fold(1.0f64, |a, &b| a.min(b));
        assert!(vmin > 0.955);
    }

    #[test]
    fn past_traces_reach_into_history() {
        let s = materialize(&ScenarioConfig {
            days: 2,
            history_days: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.past_traces(1, 1).unwrap().load[0], s.days[0].prosumers[0].load_trace);
        assert_eq!(s.past_traces(0, 1).unwrap(), s.history[0]);
        assert!(s.past_traces(0, 2).is_none());
    }
}
