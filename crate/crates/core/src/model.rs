//! Prosumers, EV batteries, tariffs and the household balance.
//!
//! Powers are in kW, energies in kWh and every conversion between the two
//! goes through an explicit slot length.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on powers (kW) used by feasibility checks.
pub const POWER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub slots_per_day: usize,
    pub slot_hours: f64,
    pub day_index: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            slots_per_day: 24,
            slot_hours: 1.0,
            day_index: 0,
        }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<()> {
        if self.slots_per_day == 0 {
            return Err(Error::InvalidParameter("slots_per_day must be at least 1".into()));
        }
        if !(self.slot_hours > 0.0) || !self.slot_hours.is_finite() {
            return Err(Error::InvalidParameter("slot_hours must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvSpec {
    pub capacity_max: f64,
    pub capacity_min: f64,
    /// Charging efficiency μ.
    pub charge_eff: f64,
    /// Discharging efficiency η.
    pub discharge_eff: f64,
    pub p_charge_max: f64,
    pub p_discharge_max: f64,
    pub soc_initial: f64,
    pub soc_desired_departure: f64,
    /// Energy requested in the last slot of the day.
    pub soc_requested_final: f64,
    /// First parked slot.
    pub avail_start: usize,
    /// Departure slot; the departure target applies to the SoC at its end.
    pub avail_end: usize,
    /// False when the EV is never home during the day.
    #[serde(default = "yes")]
    pub parked: bool,
    /// $/kW².
    pub degradation_coeff: f64,
}

fn yes() -> bool {
    true
}

impl EvSpec {
    pub fn validate(&self, slots_per_day: usize) -> Result<()> {
        let finite = [
            self.capacity_max,
            self.capacity_min,
            self.charge_eff,
            self.discharge_eff,
            self.p_charge_max,
            self.p_discharge_max,
            self.soc_initial,
            self.soc_desired_departure,
            self.soc_requested_final,
            self.degradation_coeff,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("EV parameters"));
        }
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(0.0 <= self.capacity_min
            && self.capacity_min <= self.soc_initial
            && self.soc_initial <= self.capacity_max)
        {
            return bad("EV requires 0 <= capacity_min <= soc_initial <= capacity_max");
        }
        if !(self.capacity_min <= self.soc_desired_departure
            && self.soc_desired_departure <= self.capacity_max)
        {
            return bad("EV departure target outside capacity range");
        }
        if self.soc_requested_final > self.soc_desired_departure {
            return bad("final-slot request above the departure target cannot be met");
        }
        if self.avail_start > self.avail_end || self.avail_end >= slots_per_day {
            return bad("EV availability window outside the day");
        }
        if !(0.0..=1.0).contains(&self.charge_eff) {
            return bad("charge efficiency must lie in [0, 1]");
        }
        if !(self.discharge_eff > 0.0 && self.discharge_eff <= 1.0) {
            return bad("discharge efficiency must lie in (0, 1]");
        }
        if self.degradation_coeff < 0.0 || self.p_charge_max < 0.0 || self.p_discharge_max < 0.0 {
            return bad("EV rates and degradation coefficient must be nonnegative");
        }
        Ok(())
    }

    /// Whether the EV is parked at `slot`.
    pub fn is_parked(&self, slot: usize) -> bool {
        self.parked && self.avail_start <= slot && slot <= self.avail_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TariffKind {
    Tou,
    Tpt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tariff {
    pub kind: TariffKind,
    /// $/kWh per slot, used under TOU.
    pub tou_prices: Vec<f64>,
    /// $/kWh, used under TPT.
    pub tpt_energy_price: f64,
    /// $/kW on the day's peak import, used under TPT.
    pub tpt_peak_price: f64,
}

impl Tariff {
    pub fn validate(&self, slots_per_day: usize) -> Result<()> {
        let all = self
            .tou_prices
            .iter()
            .chain([&self.tpt_energy_price, &self.tpt_peak_price]);
        for &p in all {
            if !p.is_finite() {
                return Err(Error::NonFinite("tariff prices"));
            }
            if p < 0.0 {
                return Err(Error::Negative {
                    what: "tariff price",
                    value: p,
                });
            }
        }
        if self.kind == TariffKind::Tou && self.tou_prices.len() != slots_per_day {
            return Err(Error::Dimension("TOU tariff needs one price per slot"));
        }
        Ok(())
    }

    /// Energy price applied to grid import in `slot`.
    pub fn energy_price(&self, slot: usize) -> f64 {
        match self.kind {
            TariffKind::Tou => self.tou_prices[slot],
            TariffKind::Tpt => self.tpt_energy_price,
        }
    }

    /// Peak price, zero under TOU.
    pub fn peak_price(&self) -> f64 {
        match self.kind {
            TariffKind::Tou => 0.0,
            TariffKind::Tpt => self.tpt_peak_price,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsumerState {
    pub id: usize,
    pub node: usize,
    pub ev: EvSpec,
    /// kW per slot.
    pub load_trace: Vec<f64>,
    /// Available PV, kW per slot.
    pub pv_cap_trace: Vec<f64>,
    pub grid_import_cap: f64,
    pub local_buy_cap: f64,
    pub local_sell_cap: f64,
    pub v2h_cap: f64,
    pub v2g_cap: f64,
}

impl ProsumerState {
    pub fn validate(&self, slots_per_day: usize) -> Result<()> {
        self.ev.validate(slots_per_day)?;
        if self.load_trace.len() != slots_per_day || self.pv_cap_trace.len() != slots_per_day {
            return Err(Error::Dimension("prosumer traces must cover the day"));
        }
        let caps = [
            self.grid_import_cap,
            self.local_buy_cap,
            self.local_sell_cap,
            self.v2h_cap,
            self.v2g_cap,
        ];
        for &v in self.load_trace.iter().chain(&self.pv_cap_trace).chain(&caps) {
            if !v.is_finite() {
                return Err(Error::NonFinite("prosumer data"));
            }
            if v < 0.0 {
                return Err(Error::Negative {
                    what: "prosumer trace or capacity",
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Dispatch of one prosumer in one slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub p_grid: f64,
    pub p_renew: f64,
    pub p_buy: f64,
    pub p_sell: f64,
    pub p_evc: f64,
    pub p_evd: f64,
    pub p_v2h: f64,
    pub p_v2g: f64,
    /// Reserve commitment.
    pub p_as: f64,
    /// Stored energy at the end of the slot, kWh.
    pub soc: f64,
    pub x_discharge: bool,
    pub y_sell: bool,
}

impl SlotDecision {
    /// Discharge minus its three destinations.
    pub fn split_residual(&self) -> f64 {
        self.p_evd - (self.p_v2h + self.p_v2g + self.p_sell)
    }

    /// Net active power drawn from the feeder.
    pub fn net_draw(&self) -> f64 {
        self.p_grid + self.p_buy - self.p_sell - self.p_v2g
    }
}

/// Stored energy after one slot of charging and discharging.
pub fn soc_step(soc_prev: f64, p_evc: f64, p_evd: f64, spec: &EvSpec, slot_hours: f64) -> Result<f64> {
    for (what, value) in [("soc", soc_prev), ("charge power", p_evc), ("discharge power", p_evd)] {
        if !value.is_finite() {
            return Err(Error::NonFinite(what));
        }
        if value < 0.0 {
            return Err(Error::Negative { what, value });
        }
    }
    if p_evc > POWER_TOL && p_evd > POWER_TOL {
        return Err(Error::Exclusivity("charge and discharge"));
    }
    Ok(soc_prev + spec.charge_eff * p_evc * slot_hours - p_evd * slot_hours / spec.discharge_eff)
}

/// `α Σ (p_evd² + p_evc²)`.
pub fn degradation_cost(p_evc: &[f64], p_evd: &[f64], alpha: f64) -> Result<f64> {
    if p_evc.len() != p_evd.len() {
        return Err(Error::Dimension("charge and discharge traces differ in length"));
    }
    if let Some(&v) = p_evc.iter().chain(p_evd).find(|v| **v < 0.0) {
        return Err(Error::Negative {
            what: "EV power",
            value: v,
        });
    }
    Ok(alpha * p_evc.iter().zip(p_evd).map(|(c, d)| c * c + d * d).sum::<f64>())
}

/// Cost of a grid import trace starting at slot 0 of the day.
pub fn grid_cost(p_grid: &[f64], tariff: &Tariff, slot_hours: f64) -> Result<f64> {
    if let Some(&v) = p_grid.iter().find(|v| **v < 0.0) {
        return Err(Error::Negative {
            what: "grid import",
            value: v,
        });
    }
    match tariff.kind {
        TariffKind::Tou => {
            if p_grid.len() > tariff.tou_prices.len() {
                return Err(Error::Dimension("trace longer than the TOU price vector"));
            }
            Ok(p_grid
                .iter()
                .zip(&tariff.tou_prices)
                .map(|(p, pi)| pi * p * slot_hours)
                .sum())
        }
        TariffKind::Tpt => {
            let energy: f64 = p_grid.iter().sum::<f64>() * slot_hours;
            let peak = p_grid.iter().fold(0.0f64, |m, &p| m.max(p));
            Ok(tariff.tpt_energy_price * energy + tariff.tpt_peak_price * peak)
        }
    }
}

/// Supply minus demand of the household; zero when balanced.
pub fn home_balance_residual(d: &SlotDecision, load: f64) -> f64 {
    (d.p_grid + d.p_renew + d.p_buy + d.p_v2h) - (load + d.p_evc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev() -> EvSpec {
        EvSpec {
            capacity_max: 50.0,
            capacity_min: 0.0,
            charge_eff: 0.95,
            discharge_eff: 0.9,
            p_charge_max: 7.0,
            p_discharge_max: 7.0,
            soc_initial: 20.0,
            soc_desired_departure: 40.0,
            soc_requested_final: 40.0,
            avail_start: 6,
            avail_end: 20,
            parked: true,
            degradation_coeff: 0.01,
        }
    }

    #[test]
    fn soc_step_examples() {
        let s = ev();
        assert_eq!(soc_step(20.0, 0.0, 0.0, &s, 1.0).unwrap(), 20.0);
        assert!((soc_step(20.0, 7.0, 0.0, &s, 1.0).unwrap() - 26.65).abs() < 1e-12);
        assert!((soc_step(30.0, 0.0, 4.5, &s, 1.0).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn soc_step_rejects_bad_input() {
        let s = ev();
        assert!(matches!(soc_step(20.0, -1.0, 0.0, &s, 1.0), Err(Error::Negative { .. })));
        assert!(matches!(soc_step(20.0, 1.0, 1.0, &s, 1.0), Err(Error::Exclusivity(_))));
    }

    #[test]
    fn degradation_examples() {
        assert_eq!(degradation_cost(&[0.0; 3], &[0.0; 3], 0.01).unwrap(), 0.0);
        let c = degradation_cost(&[7.0, 0.0], &[0.0, 7.0], 0.01).unwrap();
        assert!((c - 0.98).abs() < 1e-12);
        assert_eq!(degradation_cost(&[3.0, 1.0], &[0.0, 2.0], 0.0).unwrap(), 0.0);
        assert!(degradation_cost(&[1.0], &[1.0, 2.0], 0.01).is_err());
    }

    fn tou(prices: &[f64]) -> Tariff {
        Tariff {
            kind: TariffKind::Tou,
            tou_prices: prices.to_vec(),
            tpt_energy_price: 0.2,
            tpt_peak_price: 0.8,
        }
    }

    #[test]
    fn grid_cost_examples() {
        let t = tou(&[0.2, 0.32]);
        assert!((grid_cost(&[1.0, 1.0], &t, 1.0).unwrap() - 0.52).abs() < 1e-12);
        assert_eq!(grid_cost(&[0.0, 0.0], &t, 1.0).unwrap(), 0.0);
        let tpt = Tariff {
            kind: TariffKind::Tpt,
            ..t
        };
        assert!((grid_cost(&[1.0, 2.0], &tpt, 1.0).unwrap() - 2.2).abs() < 1e-12);
        assert_eq!(grid_cost(&[0.0, 0.0], &tpt, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn balance_examples() {
        let mut d = SlotDecision {
            p_grid: 2.0,
            ..Default::default()
        };
        assert_eq!(home_balance_residual(&d, 2.0), 0.0);
        d = SlotDecision {
            p_v2h: 3.0,
            p_evc: 1.0,
            ..Default::default()
        };
        assert_eq!(home_balance_residual(&d, 2.0), 0.0);
        d = SlotDecision {
            p_grid: 1.0,
            ..Default::default()
        };
        assert_eq!(home_balance_residual(&d, 2.0), -1.0);
    }

    #[test]
    fn ev_validation() {
        let mut s = ev();
        assert!(s.validate(24).is_ok());
        s.avail_end = 24;
        assert!(s.validate(24).is_err());
        s = ev();
        s.soc_initial = 60.0;
        assert!(s.validate(24).is_err());
        s = ev();
        s.discharge_eff = 0.0;
        assert!(s.validate(24).is_err());
        assert!(!ev().is_parked(5) && ev().is_parked(6) && ev().is_parked(20));
    }
}
