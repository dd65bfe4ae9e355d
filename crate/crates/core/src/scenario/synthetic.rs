//! Seeded synthetic traces: household load, rooftop PV, wholesale prices,
//! TOU schedules and the feeder's inflexible load shape.
//!
//! All shapes are written in clock hours and sampled at slot midpoints.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::MarketKind;

/// Clock hour (0..24) at the start of every slot.
pub fn clock_hours(slots: usize, slot_hours: f64, day_start_hour: f64) -> Vec<f64> {
    (0..slots)
        .map(|k| wrap_hour(day_start_hour + k as f64 * slot_hours))
        .collect()
}

/// Hour folded into `[0, 24)`.
pub fn wrap_hour(h: f64) -> f64 {
    let r = h % 24.0;
    if r < 0.0 {
        r + 24.0
    } else {
        r
    }
}

fn bump(h: f64, center: f64, width: f64) -> f64 {
    // circular distance so shapes wrap midnight
    let mut d = wrap_hour(h - center);
    if d > 12.0 {
        d -= 24.0;
    }
    libm::exp(-0.5 * (d / width) * (d / width))
}

fn noise<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    let n = Normal::new(0.0, sd).expect("finite sd");
    (1.0 + n.sample(rng)).max(0.2)
}

/// Per-household parameters of the two-peak load shape, kW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HouseholdShape {
    pub base: f64,
    pub morning_amp: f64,
    pub morning_hour: f64,
    pub evening_amp: f64,
    pub evening_hour: f64,
}

impl HouseholdShape {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            base: rng.random_range(0.45..0.8),
            morning_amp: rng.random_range(0.6..1.4),
            morning_hour: rng.random_range(6.5..8.5),
            evening_amp: rng.random_range(1.0..2.0),
            evening_hour: rng.random_range(18.0..20.0),
        }
    }

    /// Noise-free load at clock hour `h`.
    pub fn at(&self, h: f64, weekend: bool) -> f64 {
        if weekend {
            self.base
                + 0.8 * self.morning_amp * bump(h, self.morning_hour + 2.0, 1.8)
                + 0.4 * self.morning_amp * bump(h, 13.0, 2.0)
                + self.evening_amp * bump(h, self.evening_hour, 2.0)
        } else {
            self.base
                + self.morning_amp * bump(h, self.morning_hour, 1.2)
                + self.evening_amp * bump(h, self.evening_hour, 2.2)
        }
    }
}

/// One day of household load with multiplicative slot noise.
pub fn household_load<R: Rng + ?Sized>(
    shape: &HouseholdShape,
    hours: &[f64],
    slot_hours: f64,
    weekend: bool,
    rng: &mut R,
) -> Vec<f64> {
    let level = rng.random_range(0.85..1.15);
    hours
        .iter()
        .map(|&h| level * shape.at(h + 0.5 * slot_hours, weekend) * noise(rng, 0.15))
        .collect()
}

/// Clear-sky PV fraction at clock hour `h` (zero at night).
pub fn clear_sky(h: f64) -> f64 {
    let x = (h - 6.0) / 12.0;
    if x > 0.0 && x < 1.0 {
        libm::sin(core::f64::consts::PI * x)
    } else {
        0.0
    }
}

/// One day of PV output for a system of `peak_kw` under daily cloud factor
/// `cloud` in [0, 1].
pub fn pv_output<R: Rng + ?Sized>(
    peak_kw: f64,
    cloud: f64,
    hours: &[f64],
    slot_hours: f64,
    rng: &mut R,
) -> Vec<f64> {
    hours
        .iter()
        .map(|&h| {
            let s = clear_sky(h + 0.5 * slot_hours);
            if s == 0.0 {
                0.0
            } else {
                peak_kw * cloud * s * noise(rng, 0.08)
            }
        })
        .collect()
}

/// Retail TOU schedule of a market, $/kWh.
pub fn tou_price(market: MarketKind, h: f64) -> f64 {
    match market {
        MarketKind::Nem => {
            if (15.0..21.0).contains(&h) {
                0.32
            } else {
                0.20
            }
        }
        MarketKind::Isone | MarketKind::Nyiso => {
            if (16.0..21.0).contains(&h) {
                0.32
            } else if (7.0..16.0).contains(&h) || (21.0..22.0).contains(&h) {
                0.11
            } else {
                0.02
            }
        }
    }
}

/// Wholesale price shape of a market, $/kWh.
pub fn wholesale_shape(market: MarketKind, h: f64) -> f64 {
    match market {
        MarketKind::Nem => {
            0.07 + 0.08 * bump(h, 19.0, 1.5) - 0.04 * bump(h, 13.0, 2.5) + 0.02 * bump(h, 7.5, 1.2)
        }
        MarketKind::Isone => 0.04 + 0.03 * bump(h, 18.0, 2.0) + 0.01 * bump(h, 8.0, 1.5),
        MarketKind::Nyiso => 0.035 + 0.035 * bump(h, 17.5, 2.0) + 0.01 * bump(h, 8.0, 1.5),
    }
}

/// One day of wholesale prices.
pub fn wholesale_prices<R: Rng + ?Sized>(
    market: MarketKind,
    hours: &[f64],
    slot_hours: f64,
    rng: &mut R,
) -> Vec<f64> {
    let level = rng.random_range(0.8..1.2);
    hours
        .iter()
        .map(|&h| level * wholesale_shape(market, h + 0.5 * slot_hours) * noise(rng, 0.1))
        .collect()
}

/// Feeder inflexible-load shape, peak 1.
pub fn inflexible_shape(h: f64) -> f64 {
    0.55 + 0.2 * bump(h, 8.0, 1.5) + 0.45 * bump(h, 19.0, 2.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn operational_day_starts_at_noon() {
        let h = clock_hours(24, 1.0, 12.0);
        assert_eq!(h[0], 12.0);
        assert_eq!(h[6], 18.0);
        assert_eq!(h[12], 0.0);
        assert_eq!(h[19], 7.0);
    }

    #[test]
    fn pv_is_dark_at_night() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = clock_hours(24, 1.0, 12.0);
        let pv = pv_output(4.0, 1.0, &h, 1.0, &mut rng);
        for (k, &hour) in h.iter().enumerate() {
            if !(6.0..18.0).contains(&hour) {
                assert_eq!(pv[k], 0.0);
            }
        }
        assert!(pv.iter().any(|&p| p > 2.0));
    }

    #[test]
    fn load_has_evening_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = HouseholdShape::draw(&mut rng);
        assert!(shape.at(shape.evening_hour, false) > shape.at(3.0, false) + 1.0);
    }

    #[test]
    fn tou_levels() {
        assert_eq!(tou_price(MarketKind::Nem, 18.0), 0.32);
        assert_eq!(tou_price(MarketKind::Nem, 2.0), 0.2);
        assert_eq!(tou_price(MarketKind::Isone, 2.0), 0.02);
        assert_eq!(tou_price(MarketKind::Nyiso, 10.0), 0.11);
    }

    #[test]
    fn inflexible_peak_is_one() {
        let peak = (0..240)
            .map(|k| inflexible_shape(k as f64 * 0.1))
            .fold(0.0f64, f64::max);
        assert!(peak <= 1.0 + 1e-9 && peak > 0.95);
    }
}
