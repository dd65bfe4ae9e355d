//! Load and PV forecasters plus the relative RMS forecast error.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{stream_rng, DayTraces};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterKind {
    /// Every future slot repeats the value observed at the origin.
    Persistence,
    /// Same slot of previous days, averaged over the lookback.
    SeasonalNaive,
    /// Realized future times `1 + eps`, with calibrated multiplicative noise.
    ErrorInjection,
}

/// Which series the forecaster is applied to. The other is forecast
/// perfectly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastTarget {
    Load,
    Pv,
    Both,
}

impl ForecastTarget {
    pub fn load(self) -> bool {
        matches!(self, ForecastTarget::Load | ForecastTarget::Both)
    }

    pub fn pv(self) -> bool {
        matches!(self, ForecastTarget::Pv | ForecastTarget::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecasterSpec {
    pub kind: ForecasterKind,
    pub lookback_days: usize,
    /// Target relative error for error injection.
    pub sigma: f64,
    pub seed: u64,
    pub apply_to: ForecastTarget,
}

impl Default for ForecasterSpec {
    fn default() -> Self {
        Self {
            kind: ForecasterKind::SeasonalNaive,
            lookback_days: 1,
            sigma: 0.0,
            seed: 0,
            apply_to: ForecastTarget::Both,
        }
    }
}

impl ForecasterSpec {
    /// Forecasts equal to the realized future.
    pub fn perfect() -> Self {
        Self::injection(0.0, 0, ForecastTarget::Both)
    }

    pub fn injection(sigma: f64, seed: u64, apply_to: ForecastTarget) -> Self {
        Self {
            kind: ForecasterKind::ErrorInjection,
            lookback_days: 0,
            sigma,
            seed,
            apply_to,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() {
            return Err(Error::NonFinite("forecast sigma"));
        }
        if self.sigma < 0.0 {
            return Err(Error::Negative {
                what: "forecast sigma",
                value: self.sigma,
            });
        }
        if self.kind == ForecasterKind::SeasonalNaive && self.lookback_days == 0 {
            return Err(Error::InvalidParameter("seasonal naive needs lookback_days >= 1".into()));
        }
        Ok(())
    }

    /// Days of history this forecaster reads.
    pub fn history_needed(&self) -> usize {
        match self.kind {
            ForecasterKind::SeasonalNaive => self.lookback_days,
            _ => 0,
        }
    }
}

/// Predictions for slots `origin + 1 ..= origin + horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub origin: usize,
    pub horizon: usize,
    /// `[prosumer][k]`, `k = 0` is slot `origin + 1`.
    pub load: Vec<Vec<f64>>,
    pub pv: Vec<Vec<f64>>,
}

impl ForecastSeries {
    pub fn target_slot(&self, k: usize) -> usize {
        self.origin + 1 + k
    }
}

/// What a forecaster may see for one day.
#[derive(Debug, Clone, Copy)]
pub struct ForecastContext<'a> {
    pub day: usize,
    /// Realized traces of the current day. Only error injection reads past
    /// the origin.
    pub realized: &'a DayTraces,
    /// Previous days, most recent first.
    pub history: &'a [DayTraces],
}

pub trait Forecaster {
    fn forecast(&self, ctx: &ForecastContext<'_>, origin: usize, horizon: usize) -> Result<ForecastSeries>;

    /// Days of history required before `forecast` can be called.
    fn history_needed(&self) -> usize {
        0
    }
}

impl Forecaster for ForecasterSpec {
    fn forecast(&self, ctx: &ForecastContext<'_>, origin: usize, horizon: usize) -> Result<ForecastSeries> {
        forecast(self, ctx, origin, horizon)
    }

    fn history_needed(&self) -> usize {
        ForecasterSpec::history_needed(self)
    }
}

const TAG_FORECAST: u64 = 0x0f0c;

/// Forecast load and PV of every prosumer for the `horizon` slots after
/// `origin`.
pub fn forecast(spec: &ForecasterSpec, ctx: &ForecastContext<'_>, origin: usize, horizon: usize) -> Result<ForecastSeries> {
    spec.validate()?;
    let real = ctx.realized;
    let n = real.load.len();
    if real.pv.len() != n {
        return Err(Error::Dimension("load and pv prosumer counts differ"));
    }
    let slots = real.load.first().map_or(origin + 1 + horizon, Vec::len);
    if origin + 1 + horizon > slots {
        return Err(Error::Dimension("forecast horizon runs past the day"));
    }
    let need = spec.history_needed();
    if ctx.history.len() < need {
        return Err(Error::InsufficientHistory {
            needed: need,
            available: ctx.history.len(),
        });
    }
    let targets = origin + 1..origin + 1 + horizon;
    let exact = |tr: &[Vec<f64>], u: usize| tr[u][targets.clone()].to_vec();

    let mut out = ForecastSeries {
        origin,
        horizon,
        load: Vec::with_capacity(n),
        pv: Vec::with_capacity(n),
    };
    match spec.kind {
        ForecasterKind::ErrorInjection => {
            let scale = calibrate_noise_scale(spec.sigma);
            let normal = Normal::new(0.0, scale).map_err(|_| Error::InvalidParameter("noise scale".into()))?;
            let mut rng = stream_rng(spec.seed, TAG_FORECAST, ctx.day as u64, origin as u64);
            for u in 0..n {
                let mut load = exact(&real.load, u);
                let mut pv = exact(&real.pv, u);
                for k in 0..horizon {
                    // draw both every time so the streams do not depend on apply_to
                    let el = normal.sample(&mut rng).max(-1.0);
                    let ep = normal.sample(&mut rng).max(-1.0);
                    if spec.apply_to.load() {
                        load[k] *= 1.0 + el;
                    }
                    if spec.apply_to.pv() {
                        pv[k] *= 1.0 + ep;
                    }
                }
                out.load.push(load);
                out.pv.push(pv);
            }
        }
        ForecasterKind::Persistence => {
            for u in 0..n {
                let load = if spec.apply_to.load() {
                    vec![real.load[u][origin]; horizon]
                } else {
                    exact(&real.load, u)
                };
                let pv = if spec.apply_to.pv() {
                    let mut pv = vec![real.pv[u][origin]; horizon];
                    apply_night_mask(&mut pv, ctx.history, u, origin);
                    pv
                } else {
                    exact(&real.pv, u)
                };
                out.load.push(load);
                out.pv.push(pv);
            }
        }
        ForecasterKind::SeasonalNaive => {
            let days = &ctx.history[..spec.lookback_days];
            for d in days {
                if d.load.len() != n || d.pv.len() != n || d.load.iter().chain(&d.pv).any(|r| r.len() != slots) {
                    return Err(Error::Dimension("history day shape differs from the current day"));
                }
            }
            let avg = |pick: fn(&DayTraces) -> &Vec<Vec<f64>>, u: usize| -> Vec<f64> {
                targets
                    .clone()
                    .map(|s| days.iter().map(|d| pick(d)[u][s]).sum::<f64>() / days.len() as f64)
                    .collect()
            };
            for u in 0..n {
                out.load.push(if spec.apply_to.load() {
                    avg(|d| &d.load, u)
                } else {
                    exact(&real.load, u)
                });
                out.pv.push(if spec.apply_to.pv() {
                    avg(|d| &d.pv, u)
                } else {
                    exact(&real.pv, u)
                });
            }
        }
    }
    Ok(out)
}

/// Zero PV in slots that were dark in every available history day.
fn apply_night_mask(pv: &mut [f64], history: &[DayTraces], u: usize, origin: usize) {
    if history.is_empty() {
        return;
    }
    for (k, v) in pv.iter_mut().enumerate() {
        let s = origin + 1 + k;
        let dark = history
            .iter()
            .all(|d| d.pv.get(u).and_then(|r| r.get(s)).is_some_and(|&x| x == 0.0));
        if dark {
            *v = 0.0;
        }
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI)
}

/// `E[max(eps, -1)^2]` for `eps ~ N(0, s^2)`.
pub fn clamped_second_moment(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let a = -1.0 / s;
    s * s * (1.0 - normal_cdf(a) + a * normal_pdf(a)) + normal_cdf(a)
}

/// Standard deviation of the unclamped noise whose clamped RMS equals
/// `sigma`.
pub fn calibrate_noise_scale(sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let target = sigma * sigma;
    let (mut lo, mut hi) = (0.0, sigma.max(1.0));
    while clamped_second_moment(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clamped_second_moment(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `||predicted - realized||_2 / ||realized||_2` over aligned rows.
fn rms_relative_error(predicted: &[Vec<f64>], realized: &[Vec<f64>]) -> Result<f64> {
    if predicted.len() != realized.len() {
        return Err(Error::Dimension("predicted and realized row counts differ"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (p, r) in predicted.iter().zip(realized) {
        if p.len() != r.len() {
            return Err(Error::Dimension("predicted and realized lengths differ"));
        }
        for (&a, &b) in p.iter().zip(r) {
            num += (a - b) * (a - b);
            den += b * b;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator("relative error"));
    }
    Ok(libm::sqrt(num / den))
}

/// Relative RMS error of load forecasts. Rows are prosumers, columns the
/// forecast points being scored.
pub fn relative_error_load(predicted: &[Vec<f64>], realized: &[Vec<f64>]) -> Result<f64> {
    rms_relative_error(predicted, realized)
}

/// Relative RMS error of PV forecasts.
pub fn relative_error_pv(predicted: &[Vec<f64>], realized: &[Vec<f64>]) -> Result<f64> {
    rms_relative_error(predicted, realized)
}

/// Forecast points gathered over a run, keyed by prosumer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub load_pred: Vec<Vec<f64>>,
    pub load_real: Vec<Vec<f64>>,
    pub pv_pred: Vec<Vec<f64>>,
    pub pv_real: Vec<Vec<f64>>,
}

impl ErrorSample {
    pub fn new(prosumers: usize) -> Self {
        Self {
            load_pred: vec![Vec::new(); prosumers],
            load_real: vec![Vec::new(); prosumers],
            pv_pred: vec![Vec::new(); prosumers],
            pv_real: vec![Vec::new(); prosumers],
        }
    }

    /// Add every target of `series` that falls inside `window[u]`
    /// (inclusive slot range), or every target when `window` is `None`.
    pub fn record(&mut self, series: &ForecastSeries, realized: &DayTraces, window: Option<&[(usize, usize)]>) {
        for u in 0..series.load.len() {
            for k in 0..series.horizon {
                let s = series.target_slot(k);
                if let Some(w) = window {
                    let (a, b) = w[u];
                    if s < a || s > b {
                        continue;
                    }
                }
                self.load_pred[u].push(series.load[u][k]);
                self.load_real[u].push(realized.load[u][s]);
                self.pv_pred[u].push(series.pv[u][k]);
                self.pv_real[u].push(realized.pv[u][s]);
            }
        }
    }

    pub fn merge(&mut self, other: &ErrorSample) {
        let cat = |a: &mut Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            if a.len() < b.len() {
                a.resize(b.len(), Vec::new());
            }
            for (x, y) in a.iter_mut().zip(b) {
                x.extend_from_slice(y);
            }
        };
        cat(&mut self.load_pred, &other.load_pred);
        cat(&mut self.load_real, &other.load_real);
        cat(&mut self.pv_pred, &other.pv_pred);
        cat(&mut self.pv_real, &other.pv_real);
    }

    pub fn re_load(&self) -> Result<f64> {
        relative_error_load(&self.load_pred, &self.load_real)
    }

    pub fn re_pv(&self) -> Result<f64> {
        relative_error_pv(&self.pv_pred, &self.pv_real)
    }
}

/// Externally produced forecasts keyed by `(day, prosumer, origin, target)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ForecastTable {
    pub entries: BTreeMap<(usize, usize, usize, usize), (f64, f64)>,
}

impl ForecastTable {
    pub fn insert(&mut self, day: usize, prosumer: usize, origin: usize, target: usize, load: f64, pv: f64) {
        self.entries.insert((day, prosumer, origin, target), (load, pv));
    }
}

impl Forecaster for ForecastTable {
    fn forecast(&self, ctx: &ForecastContext<'_>, origin: usize, horizon: usize) -> Result<ForecastSeries> {
        let n = ctx.realized.load.len();
        let mut out = ForecastSeries {
            origin,
            horizon,
            load: vec![Vec::with_capacity(horizon); n],
            pv: vec![Vec::with_capacity(horizon); n],
        };
        for u in 0..n {
            for k in 0..horizon {
                let target = origin + 1 + k;
                let &(l, p) = self.entries.get(&(ctx.day, u, origin, target)).ok_or_else(|| {
                    Error::MissingData(alloc::format!(
                        "no forecast for day {} prosumer {u} origin {origin} target {target}",
                        ctx.day
                    ))
                })?;
                if !(l.is_finite() && p.is_finite()) || l < 0.0 || p < 0.0 {
                    return Err(Error::InvalidParameter(alloc::format!(
                        "forecast for prosumer {u} target {target} must be finite and nonnegative"
                    )));
                }
                out.load[u].push(l);
                out.pv[u].push(p);
            }
        }
        Ok(out)
    }
}
