//! V2H, V2G with reserve, and local energy trading.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EvSpec, SlotDecision, POWER_TOL};

/// Default feed-in price used for the mid-market rate, $/kWh.
pub const DEFAULT_FEED_IN: f64 = 0.04;
/// Default reserve price as a fraction of the V2G price.
pub const DEFAULT_RESERVE_RATIO: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPrices {
    /// $/kWh per slot.
    pub v2g_price: Vec<f64>,
    /// $/kW of committed reserve per slot-hour.
    pub reserve_price: Vec<f64>,
    /// `[prosumer][slot]`.
    pub local_buy: Vec<Vec<f64>>,
    /// `[prosumer][slot]`.
    pub local_sell: Vec<Vec<f64>>,
}

impl MarketPrices {
    pub fn validate(&self, prosumers: usize, slots: usize) -> Result<()> {
        if self.v2g_price.len() != slots || self.reserve_price.len() != slots {
            return Err(Error::Dimension("market prices must cover the day"));
        }
        if self.local_buy.len() != prosumers || self.local_sell.len() != prosumers {
            return Err(Error::Dimension("local prices needed for every prosumer"));
        }
        for (b, s) in self.local_buy.iter().zip(&self.local_sell) {
            if b.len() != slots || s.len() != slots {
                return Err(Error::Dimension("local prices must cover the day"));
            }
            for (&buy, &sell) in b.iter().zip(s) {
                if sell > buy {
                    return Err(Error::InvertedPrices { buy, sell });
                }
            }
        }
        let all = self
            .v2g_price
            .iter()
            .chain(&self.reserve_price)
            .chain(self.local_buy.iter().flatten())
            .chain(self.local_sell.iter().flatten());
        for &p in all {
            if !p.is_finite() {
                return Err(Error::NonFinite("market prices"));
            }
            if p < 0.0 {
                return Err(Error::Negative {
                    what: "market price",
                    value: p,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamToggle {
    pub v2h: bool,
    pub v2g: bool,
    pub trading: bool,
}

impl StreamToggle {
    pub const ALL: Self = Self {
        v2h: true,
        v2g: true,
        trading: true,
    };
    pub const NONE: Self = Self {
        v2h: false,
        v2g: false,
        trading: false,
    };

    pub fn any(&self) -> bool {
        self.v2h || self.v2g || self.trading
    }

    /// Short label such as `v2h+et`, or `none`.
    pub fn label(&self) -> alloc::string::String {
        let mut parts = Vec::new();
        if self.v2h {
            parts.push("v2h");
        }
        if self.v2g {
            parts.push("v2g");
        }
        if self.trading {
            parts.push("et");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

/// Local trading price halfway between retail and feed-in. Returns
/// `(local_buy, local_sell)`, which are equal.
pub fn mid_market_rate(retail_buy: f64, feed_in: f64) -> Result<(f64, f64)> {
    if !(retail_buy.is_finite() && feed_in.is_finite()) {
        return Err(Error::NonFinite("retail or feed-in price"));
    }
    if feed_in < 0.0 {
        return Err(Error::Negative {
            what: "feed-in price",
            value: feed_in,
        });
    }
    if retail_buy < feed_in {
        return Err(Error::InvertedPrices {
            buy: retail_buy,
            sell: feed_in,
        });
    }
    let mid = 0.5 * (retail_buy + feed_in);
    Ok((mid, mid))
}

/// Energy and reserve revenue over consecutive slots.
pub fn v2g_revenue(d: &[SlotDecision], v2g_price: &[f64], reserve_price: &[f64], slot_hours: f64) -> Result<f64> {
    if d.len() > v2g_price.len() || d.len() > reserve_price.len() {
        return Err(Error::Dimension("prices shorter than the decision trace"));
    }
    Ok(d.iter()
        .enumerate()
        .map(|(t, s)| (v2g_price[t] * s.p_v2g + reserve_price[t] * s.p_as) * slot_hours)
        .sum())
}

/// Usable SoC range left after committing `p_as` of reserve for one slot.
pub fn reserve_soc_bounds(spec: &EvSpec, p_as: f64, slot_hours: f64) -> Result<(f64, f64)> {
    if p_as < 0.0 {
        return Err(Error::Negative {
            what: "reserve",
            value: p_as,
        });
    }
    let limit = spec.capacity_max / 2.0;
    if p_as > limit {
        return Err(Error::ReserveTooLarge { p_as, limit });
    }
    Ok((spec.capacity_min + p_as * slot_hours, spec.capacity_max - p_as * slot_hours))
}

/// Purchases minus sales on the local market.
pub fn trading_cost(d: &[SlotDecision], local_buy: &[f64], local_sell: &[f64], slot_hours: f64) -> Result<f64> {
    if d.len() > local_buy.len() || d.len() > local_sell.len() {
        return Err(Error::Dimension("prices shorter than the decision trace"));
    }
    let mut total = 0.0;
    for (t, s) in d.iter().enumerate() {
        if s.p_buy > POWER_TOL && s.p_sell > POWER_TOL {
            return Err(Error::Exclusivity("local buy and sell"));
        }
        total += (local_buy[t] * s.p_buy - local_sell[t] * s.p_sell) * slot_hours;
    }
    Ok(total)
}

/// Total sold minus total bought in one slot.
pub fn market_clearing_residual<'a>(slot: impl IntoIterator<Item = &'a SlotDecision>) -> f64 {
    slot.into_iter().map(|d| d.p_sell - d.p_buy).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mid_market_examples() {
        let (b, s) = mid_market_rate(0.32, 0.08).unwrap();
        assert!((b - 0.20).abs() < 1e-15 && b == s);
        assert_eq!(mid_market_rate(0.2, 0.2).unwrap(), (0.2, 0.2));
        assert_eq!(mid_market_rate(0.32, 0.0).unwrap().0, 0.16);
        assert!(matches!(mid_market_rate(0.1, 0.2), Err(Error::InvertedPrices { .. })));
    }

    #[test]
    fn v2g_revenue_examples() {
        let zero = [SlotDecision::default()];
        assert_eq!(v2g_revenue(&zero, &[0.3], &[0.05], 1.0).unwrap(), 0.0);
        let export = [SlotDecision {
            p_v2g: 2.0,
            ..Default::default()
        }];
        assert!((v2g_revenue(&export, &[0.3], &[0.05], 1.0).unwrap() - 0.6).abs() < 1e-15);
        let reserve = [SlotDecision {
            p_as: 10.0,
            ..Default::default()
        }];
        assert!((v2g_revenue(&reserve, &[0.3], &[0.05], 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    fn battery() -> EvSpec {
        EvSpec {
            capacity_max: 50.0,
            capacity_min: 0.0,
            charge_eff: 0.95,
            discharge_eff: 0.95,
            p_charge_max: 7.0,
            p_discharge_max: 7.0,
            soc_initial: 25.0,
            soc_desired_departure: 40.0,
            soc_requested_final: 40.0,
            avail_start: 6,
            avail_end: 20,
            parked: true,
            degradation_coeff: 0.01,
        }
    }

    #[test]
    fn reserve_bounds_examples() {
        let ev = battery();
        assert_eq!(reserve_soc_bounds(&ev, 0.0, 1.0).unwrap(), (0.0, 50.0));
        assert_eq!(reserve_soc_bounds(&ev, 10.0, 1.0).unwrap(), (10.0, 40.0));
        assert_eq!(reserve_soc_bounds(&ev, 25.0, 1.0).unwrap(), (25.0, 25.0));
        assert!(matches!(reserve_soc_bounds(&ev, 26.0, 1.0), Err(Error::ReserveTooLarge { .. })));
    }

    #[test]
    fn trading_examples() {
        let none = [SlotDecision::default()];
        assert_eq!(trading_cost(&none, &[0.2], &[0.2], 1.0).unwrap(), 0.0);
        let buy = [SlotDecision {
            p_buy: 3.0,
            ..Default::default()
        }];
        assert!((trading_cost(&buy, &[0.2], &[0.2], 1.0).unwrap() - 0.6).abs() < 1e-15);
        let sell = [SlotDecision {
            p_sell: 3.0,
            ..Default::default()
        }];
        assert!((trading_cost(&sell, &[0.2], &[0.2], 1.0).unwrap() + 0.6).abs() < 1e-15);
        let both = [SlotDecision {
            p_sell: 1.0,
            p_buy: 1.0,
            ..Default::default()
        }];
        assert!(matches!(trading_cost(&both, &[0.2], &[0.2], 1.0), Err(Error::Exclusivity(_))));
    }

    #[test]
    fn clearing_examples() {
        assert_eq!(market_clearing_residual(&[SlotDecision::default()]), 0.0);
        let s = SlotDecision {
            p_sell: 2.0,
            ..Default::default()
        };
        let b2 = SlotDecision {
            p_buy: 2.0,
            ..Default::default()
        };
        let b1 = SlotDecision {
            p_buy: 1.0,
            ..Default::default()
        };
        assert_eq!(market_clearing_residual(&vec![s, b2]), 0.0);
        assert_eq!(market_clearing_residual(&vec![s, b1]), 1.0);
    }

    #[test]
    fn toggle_labels() {
        assert_eq!(StreamToggle::ALL.label(), "v2h+v2g+et");
        assert_eq!(StreamToggle::NONE.label(), "none");
    }
}
