//! Cost reduction, marginal stream contributions and forecast-error
//! sensitivity.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{ErrorSample, ForecastTarget, ForecasterSpec};
use crate::model::TariffKind;
use crate::optimizer::MiqpMode;
use crate::rho::{ev_windows, run_day, RunLedger, RunOptions};
use crate::scenario::{MarketKind, Scenario};
use crate::streams::StreamToggle;

/// `Σ|predicted - perfect| / Σ perfect` over aligned cost entries.
pub fn rec(predicted: &[Vec<f64>], perfect: &[Vec<f64>]) -> Result<f64> {
    if predicted.len() != perfect.len() {
        return Err(Error::Dimension("cost ledgers cover different prosumers"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (p, c) in predicted.iter().zip(perfect) {
        if p.len() != c.len() {
            return Err(Error::Dimension("cost ledgers cover different slots"));
        }
        for (a, b) in p.iter().zip(c) {
            num += (a - b).abs();
            den += b;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator("relative extra cost"));
    }
    Ok(num / den)
}

/// Per-prosumer costs of the slots inside each EV window.
pub fn window_costs(ledger: &RunLedger, windows: &[(usize, usize)]) -> Vec<Vec<f64>> {
    ledger
        .cost_matrix()
        .into_iter()
        .zip(windows)
        .map(|(row, &(a, b))| row.into_iter().enumerate().filter(|(t, _)| a <= *t && *t <= b).map(|(_, c)| c).collect())
        .collect()
}

/// REC of a campaign against its perfect-forecast counterpart, pooled over
/// days, prosumers and EV-window slots.
pub fn campaign_rec(scenario: &Scenario, predicted: &[RunLedger], perfect: &[RunLedger]) -> Result<f64> {
    if predicted.len() != perfect.len() {
        return Err(Error::Mismatch("campaigns cover different days".into()));
    }
    let (mut p, mut c) = (Vec::new(), Vec::new());
    for (a, b) in predicted.iter().zip(perfect) {
        if a.day != b.day {
            return Err(Error::Mismatch(alloc::format!("day {} paired with day {}", a.day, b.day)));
        }
        let w = ev_windows(&scenario.days[a.day]);
        p.extend(window_costs(a, &w));
        c.extend(window_costs(b, &w));
    }
    rec(&p, &c)
}

/// Percent saved against the reference.
pub fn cost_reduction(stacked: f64, reference: f64) -> Result<f64> {
    if !(reference > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "reference cost must be positive, got {reference}"
        )));
    }
    Ok(100.0 * (reference - stacked) / reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub id: String,
    pub tariff: TariffKind,
    pub market: MarketKind,
    pub streams: StreamToggle,
    pub total_cost: f64,
    /// Percent against the matched no-V2X reference.
    pub cost_reduction: f64,
    pub rec: Option<f64>,
    pub re_load: Option<f64>,
    pub re_pv: Option<f64>,
}

/// Contribution of one stream, from the full stack and the run without it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    /// Difference of cost reductions, percentage points.
    pub absolute: f64,
    /// That difference relative to the full-stack reduction, percent.
    pub ratio: f64,
}

pub fn marginal_contribution(full: &ScenarioResult, without: &ScenarioResult) -> Result<Marginal> {
    if full.tariff != without.tariff || full.market != without.market {
        return Err(Error::Mismatch("results come from different tariffs or markets".into()));
    }
    let f = full.streams;
    let w = without.streams;
    if (w.v2h && !f.v2h) || (w.v2g && !f.v2g) || (w.trading && !f.trading) {
        return Err(Error::Mismatch("leave-one-out streams must be a subset of the full stack".into()));
    }
    let absolute = full.cost_reduction - without.cost_reduction;
    let ratio = if absolute == 0.0 {
        0.0
    } else if full.cost_reduction == 0.0 {
        return Err(Error::ZeroDenominator("marginal contribution ratio"));
    } else {
        100.0 * absolute / full.cost_reduction
    };
    Ok(Marginal { absolute, ratio })
}

/// One campaign of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub seed: u64,
    /// Measured relative error of the perturbed series.
    pub re: f64,
    pub rec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub re_low: f64,
    pub re_high: f64,
    pub count: usize,
    pub mean_rec: f64,
    pub std_rec: f64,
}

/// Perfect-forecast ledgers for every day, the baseline of a sweep.
pub fn perfect_campaign(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<RunLedger>> {
    let spec = ForecasterSpec::perfect();
    (0..scenario.days.len()).map(|d| run_day(scenario, d, &spec, opts)).collect()
}

/// Run one error-injection campaign and score it against `perfect`.
pub fn sweep_point(
    scenario: &Scenario,
    perfect: &[RunLedger],
    sigma: f64,
    seed: u64,
    target: ForecastTarget,
    opts: &RunOptions,
) -> Result<SweepPoint> {
    let spec = ForecasterSpec::injection(sigma, seed, target);
    let runs: Vec<RunLedger> = (0..scenario.days.len())
        .map(|d| run_day(scenario, d, &spec, opts))
        .collect::<Result<_>>()?;
    let mut sample = ErrorSample::new(scenario.num_prosumers());
    for r in &runs {
        sample.merge(&r.errors);
    }
    let re = match target {
        ForecastTarget::Pv => sample.re_pv(),
        _ => sample.re_load(),
    }
    .or_else(|e| if sigma == 0.0 { Ok(0.0) } else { Err(e) })?;
    Ok(SweepPoint {
        sigma,
        seed,
        re,
        rec: campaign_rec(scenario, &runs, perfect)?,
    })
}

/// Sweep `sigmas` x `seeds` with error injection on `target`.
pub fn sensitivity_sweep(
    scenario: &Scenario,
    sigmas: &[f64],
    seeds: &[u64],
    target: ForecastTarget,
    opts: &RunOptions,
) -> Result<Vec<SweepPoint>> {
    if sigmas.iter().any(|s| !(*s >= 0.0)) || sigmas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("sigma grid must be nonnegative and ascending".into()));
    }
    let perfect = perfect_campaign(scenario, opts)?;
    let mut out = Vec::with_capacity(sigmas.len() * seeds.len());
    for &s in sigmas {
        for &seed in seeds {
            out.push(sweep_point(scenario, &perfect, s, seed, target, opts)?);
        }
    }
    Ok(out)
}

/// Group sweep points into RE bins of `width`, starting at zero. Empty bins
/// are left out.
pub fn bin_curve(points: &[SweepPoint], width: f64) -> Vec<CurveBin> {
    if points.is_empty() || !(width > 0.0) {
        return Vec::new();
    }
    let top = points.iter().fold(0.0f64, |m, p| m.max(p.re));
    let nbins = (top / width) as usize + 1;
    let mut out = Vec::new();
    for b in 0..nbins {
        let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
        let recs: Vec<f64> = points.iter().filter(|p| p.re >= lo && p.re < hi).map(|p| p.rec).collect();
        if recs.is_empty() {
            continue;
        }
        let mean = recs.iter().sum::<f64>() / recs.len() as f64;
        let var = recs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / recs.len() as f64;
        out.push(CurveBin {
            re_low: lo,
            re_high: hi,
            count: recs.len(),
            mean_rec: mean,
            std_rec: libm::sqrt(var),
        });
    }
    out
}

/// The eight configurations compared against each other: full stack, each
/// stream alone, each stream left out, and the reference without V2X.
pub fn baseline_set() -> [(&'static str, StreamToggle); 8] {
    let t = |v2h, v2g, trading| StreamToggle { v2h, v2g, trading };
    [
        ("full", StreamToggle::ALL),
        ("v2h_alone", t(true, false, false)),
        ("v2g_alone", t(false, true, false)),
        ("et_alone", t(false, false, true)),
        ("without_v2h", t(false, true, true)),
        ("without_v2g", t(true, false, true)),
        ("without_et", t(true, true, false)),
        ("reference", StreamToggle::NONE),
    ]
}

/// Total perfect-information cost of every day under `streams`.
pub fn optimal_cost(scenario: &Scenario, streams: StreamToggle, mode: MiqpMode, opts: &RunOptions) -> Result<f64> {
    let mut total = 0.0;
    for day in &scenario.days {
        let r = crate::rho::day_ahead(&day.with_streams(streams), mode, &opts.limits)?;
        if r.status == crate::optimizer::SolveStatus::Infeasible {
            return Err(Error::InvalidParameter(alloc::format!(
                "day {} is infeasible with streams {}",
                day.grid.day_index,
                streams.label()
            )));
        }
        total += r.objective;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rec_examples() {
        let c = vec![vec![1.0, 2.0], vec![3.0]];
        assert_eq!(rec(&c, &c).unwrap(), 0.0);
        let up: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|v| 1.1 * v).collect()).collect();
        assert!((rec(&up, &c).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(rec(&[vec![1.0]], &[vec![0.0]]), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn cost_reduction_examples() {
        assert_eq!(cost_reduction(50.0, 50.0).unwrap(), 0.0);
        assert_eq!(cost_reduction(80.0, 100.0).unwrap(), 20.0);
        assert!(cost_reduction(1.0, 0.0).is_err());
    }

    fn result(streams: StreamToggle, cr: f64) -> ScenarioResult {
        ScenarioResult {
            id: streams.label(),
            tariff: TariffKind::Tou,
            market: MarketKind::Nem,
            streams,
            total_cost: 0.0,
            cost_reduction: cr,
            rec: None,
            re_load: None,
            re_pv: None,
        }
    }

    #[test]
    fn marginal_examples() {
        let full = result(StreamToggle::ALL, 12.0);
        let no_et = StreamToggle {
            trading: false,
            ..StreamToggle::ALL
        };
        let m = marginal_contribution(&full, &result(no_et, 12.0)).unwrap();
        assert_eq!((m.absolute, m.ratio), (0.0, 0.0));
        let m = marginal_contribution(&full, &result(no_et, 9.0)).unwrap();
        assert_eq!(m.absolute, 3.0);
        assert_eq!(m.ratio, 25.0);
        let mut other = result(no_et, 9.0);
        other.market = MarketKind::Isone;
        assert!(marginal_contribution(&full, &other).is_err());
    }

    #[test]
    fn bins_skip_empty() {
        let p = |re, rec| SweepPoint {
            sigma: 0.0,
            seed: 0,
            re,
            rec,
        };
        let bins = bin_curve(&[p(0.0, 0.0), p(0.31, 0.05), p(0.33, 0.07)], 0.05);
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].mean_rec, 0.0);
        assert_eq!(bins[1].count, 2);
        assert!((bins[1].mean_rec - 0.06).abs() < 1e-12);
    }
}
