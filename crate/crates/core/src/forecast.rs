//! Forecast series, synthetic household profiles and noisy realizations.
//!
//! A [`ForecastSeries`] holds per-step predicted means and standard deviations
//! for the hot-water draw, PV output, household electrical demand and
//! electricity price. [`realize`] turns it into one noisy sample path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::{CsvDoc, ParsedCsv};
use crate::models::{pv_power, PvParams};

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Predicted values and their uncertainty for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForecastPoint {
    /// Hot water drawn over the step, kg.
    pub water_pred: f64,
    /// Mean PV power over the step, W.
    pub pv_pred: f64,
    /// Mean household electrical demand, W.
    pub el_pred: f64,
    /// Electricity price, currency per kWh.
    pub price_pred: f64,
    pub water_sigma: f64,
    pub pv_sigma: f64,
    pub el_sigma: f64,
    pub price_sigma: f64,
}

impl ForecastPoint {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.water_pred,
            self.pv_pred,
            self.el_pred,
            self.price_pred,
            self.water_sigma,
            self.pv_sigma,
            self.el_sigma,
            self.price_sigma,
        ];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("forecast values must be finite".into()));
        }
        if self.water_pred < 0.0 || self.pv_pred < 0.0 || self.el_pred < 0.0 {
            return Err(Error::Config(
                "predicted water, PV and demand must be non-negative".into(),
            ));
        }
        if all[4..].iter().any(|s| *s < 0.0) {
            return Err(Error::Config("forecast sigmas must be non-negative".into()));
        }
        Ok(())
    }

    /// Same means, all standard deviations zero.
    pub fn without_noise(self) -> Self {
        ForecastPoint {
            water_sigma: 0.0,
            pv_sigma: 0.0,
            el_sigma: 0.0,
            price_sigma: 0.0,
            ..self
        }
    }
}

/// Standard deviation of each quantity as a multiple of its predicted mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRatios {
    pub water: f64,
    pub pv: f64,
    pub el: f64,
    pub price: f64,
}

impl Default for NoiseRatios {
    fn default() -> Self {
        NoiseRatios {
            water: 2.0 / 3.0,
            pv: 0.5 / 3.0,
            el: 1.0 / 3.0,
            price: 5.0 / 3.0,
        }
    }
}

impl NoiseRatios {
    pub fn zero() -> Self {
        NoiseRatios {
            water: 0.0,
            pv: 0.0,
            el: 0.0,
            price: 0.0,
        }
    }
}

/// Fill the sigma fields from the default noise ratios.
pub fn noise_sigmas(point: ForecastPoint) -> ForecastPoint {
    noise_sigmas_with(point, &NoiseRatios::default())
}

pub fn noise_sigmas_with(point: ForecastPoint, ratios: &NoiseRatios) -> ForecastPoint {
    ForecastPoint {
        water_sigma: ratios.water * point.water_pred,
        pv_sigma: ratios.pv * point.pv_pred,
        el_sigma: ratios.el * point.el_pred,
        // prices may be negative in real-time markets; spread stays non-negative
        price_sigma: ratios.price * point.price_pred.abs(),
        ..point
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSeries {
    /// Step length, s.
    pub dt: f64,
    pub points: Vec<ForecastPoint>,
}

impl ForecastSeries {
    pub fn new(dt: f64, points: Vec<ForecastPoint>) -> Result<Self> {
        let series = ForecastSeries { dt, points };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.points.is_empty() {
            return Err(Error::Config("forecast series is empty".into()));
        }
        self.points.iter().try_for_each(ForecastPoint::validate)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn without_noise(&self) -> Self {
        ForecastSeries {
            dt: self.dt,
            points: self.points.iter().map(|p| p.without_noise()).collect(),
        }
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut doc = CsvDoc::new();
        doc.meta("kind", "forecast")
            .meta("dt_s", self.dt)
            .meta("config_hash", config_hash);
        doc.row(SERIES_COLUMNS);
        for (k, p) in self.points.iter().enumerate() {
            doc.row([
                k.to_string(),
                p.water_pred.to_string(),
                p.pv_pred.to_string(),
                p.el_pred.to_string(),
                p.price_pred.to_string(),
                p.water_sigma.to_string(),
                p.pv_sigma.to_string(),
                p.el_sigma.to_string(),
                p.price_sigma.to_string(),
            ]);
        }
        doc.finish()
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let csv = ParsedCsv::parse(text, "forecast csv")?;
        let cols = csv.require_columns(&SERIES_COLUMNS)?;
        let dt: f64 = csv.meta_value("dt_s")?;
        let mut points = Vec::with_capacity(csv.rows.len());
        for r in 0..csv.rows.len() {
            let t: usize = csv.field(r, cols[0])?;
            if t != r {
                return Err(Error::parse(
                    "forecast csv",
                    format!("row {r} has t_index {t}"),
                ));
            }
            points.push(ForecastPoint {
                water_pred: csv.field(r, cols[1])?,
                pv_pred: csv.field(r, cols[2])?,
                el_pred: csv.field(r, cols[3])?,
                price_pred: csv.field(r, cols[4])?,
                water_sigma: csv.field(r, cols[5])?,
                pv_sigma: csv.field(r, cols[6])?,
                el_sigma: csv.field(r, cols[7])?,
                price_sigma: csv.field(r, cols[8])?,
            });
        }
        ForecastSeries::new(dt, points)
    }
}

const SERIES_COLUMNS: [&str; 9] = [
    "t_index",
    "water_pred_kg",
    "pv_pred_w",
    "el_pred_w",
    "price_pred_per_kwh",
    "water_sigma",
    "pv_sigma",
    "el_sigma",
    "price_sigma",
];

const REALIZATION_COLUMNS: [&str; 5] = [
    "t_index",
    "water_real_kg",
    "pv_real_w",
    "el_real_w",
    "price_real_per_kwh",
];

/// Realized values for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RealizedPoint {
    pub water: f64,
    pub pv: f64,
    pub el: f64,
    pub price: f64,
}

/// One noisy sample path around a forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub dt: f64,
    pub seed: u64,
    pub points: Vec<RealizedPoint>,
}

impl Realization {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The forecast means taken as the realized values.
    pub fn from_means(series: &ForecastSeries, seed: u64) -> Self {
        Realization {
            dt: series.dt,
            seed,
            points: series
                .points
                .iter()
                .map(|p| RealizedPoint {
                    water: p.water_pred,
                    pv: p.pv_pred,
                    el: p.el_pred,
                    price: p.price_pred,
                })
                .collect(),
        }
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut doc = CsvDoc::new();
        doc.meta("kind", "realization")
            .meta("dt_s", self.dt)
            .meta("seed", self.seed)
            .meta(
                "negative_values",
                "water, pv and demand clipped at 0; price unclipped",
            )
            .meta("config_hash", config_hash);
        doc.row(REALIZATION_COLUMNS);
        for (k, p) in self.points.iter().enumerate() {
            doc.row([
                k.to_string(),
                p.water.to_string(),
                p.pv.to_string(),
                p.el.to_string(),
                p.price.to_string(),
            ]);
        }
        doc.finish()
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let csv = ParsedCsv::parse(text, "realization csv")?;
        let cols = csv.require_columns(&REALIZATION_COLUMNS)?;
        let mut points = Vec::with_capacity(csv.rows.len());
        for r in 0..csv.rows.len() {
            points.push(RealizedPoint {
                water: csv.field(r, cols[1])?,
                pv: csv.field(r, cols[2])?,
                el: csv.field(r, cols[3])?,
                price: csv.field(r, cols[4])?,
            });
        }
        Ok(Realization {
            dt: csv.meta_value("dt_s")?,
            seed: csv.meta_value("seed")?,
            points,
        })
    }
}

/// Gaussian draws around every forecast mean, before any clipping.
///
/// Each step consumes four standard-normal variates in the order water, PV,
/// demand, price from a ChaCha8 stream seeded with `seed`.
pub fn sample_unclipped(series: &ForecastSeries, seed: u64) -> Vec<RealizedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    series
        .points
        .iter()
        .map(|p| {
            let mut draw = |mean: f64, sigma: f64| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean + sigma * z
            };
            RealizedPoint {
                water: draw(p.water_pred, p.water_sigma),
                pv: draw(p.pv_pred, p.pv_sigma),
                el: draw(p.el_pred, p.el_sigma),
                price: draw(p.price_pred, p.price_sigma),
            }
        })
        .collect()
}

/// Noisy realization of `series`; water, PV and demand are clipped at zero.
pub fn realize(series: &ForecastSeries, seed: u64) -> Realization {
    let points = sample_unclipped(series, seed)
        .into_iter()
        .map(|p| RealizedPoint {
            water: p.water.max(0.0),
            pv: p.pv.max(0.0),
            el: p.el.max(0.0),
            price: p.price,
        })
        .collect();
    Realization {
        dt: series.dt,
        seed,
        points,
    }
}

/// Shape of the price column in a synthetic series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceCurve {
    Flat(f64),
    /// Two-level tariff: `day` between the given hours, `night` otherwise.
    DayNight {
        day: f64,
        night: f64,
        day_start_h: f64,
        day_end_h: f64,
    },
}

/// Settings for the bundled synthetic household.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileConfig {
    pub days: usize,
    /// Step length, s. Must divide a day.
    pub dt: f64,
    pub pv: PvParams,
    /// Clear-sky peak plane-of-array irradiance, W/m².
    pub peak_irradiance: f64,
    /// Per-day irradiance multipliers, cycled over the days.
    pub weather: Vec<f64>,
    /// Total hot-water draw per day, kg.
    pub water_daily_kg: f64,
    /// Multiplier on the household demand shape.
    pub el_scale: f64,
    pub price: PriceCurve,
    pub noise: NoiseRatios,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            days: 3,
            dt: 900.0,
            pv: PvParams::default(),
            peak_irradiance: 850.0,
            weather: vec![1.0, 0.7, 0.9],
            water_daily_kg: 140.0,
            el_scale: 1.0,
            price: PriceCurve::Flat(0.30),
            noise: NoiseRatios::default(),
        }
    }
}

impl ProfileConfig {
    pub fn steps_per_day(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        let n = SECONDS_PER_DAY / self.dt;
        if (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
            return Err(Error::Config(format!(
                "dt={} s does not divide a day",
                self.dt
            )));
        }
        Ok(n.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.steps_per_day()?;
        if self.days == 0 {
            return Err(Error::Config("day count must be at least one".into()));
        }
        self.pv.validate()?;
        if self.weather.is_empty() || self.weather.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("weather factors must be non-negative".into()));
        }
        let nonneg = [self.peak_irradiance, self.water_daily_kg, self.el_scale];
        if nonneg.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "irradiance, water volume and demand scale must be non-negative".into(),
            ));
        }
        let r = self.noise;
        if [r.water, r.pv, r.el, r.price].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("noise ratios must be non-negative".into()));
        }
        Ok(())
    }
}

// Daily shapes of the synthetic household. Hours are local solar time.
const SUNRISE_H: f64 = 6.0;
const SUNSET_H: f64 = 20.0;

/// (centre hour, width in hours, share of the daily volume)
const WATER_EVENTS: [(f64, f64, f64); 3] = [(7.0, 0.6, 0.38), (12.5, 0.8, 0.10), (19.5, 0.9, 0.40)];
/// Remaining daily volume spread evenly over the day (tap use, losses in pipes).
const WATER_BASE_SHARE: f64 = 0.12;

const EL_BASE_W: f64 = 250.0;
/// (centre hour, width in hours, peak W)
const EL_EVENTS: [(f64, f64, f64); 3] =
    [(7.25, 0.75, 500.0), (12.5, 1.0, 300.0), (19.0, 1.25, 800.0)];

/// Periodic bump on the 24 h clock.
fn daily_bump(hour: f64, centre: f64, width: f64) -> f64 {
    let mut d = (hour - centre).rem_euclid(24.0);
    if d > 12.0 {
        d -= 24.0;
    }
    (-0.5 * (d / width).powi(2)).exp()
}

/// Clear-sky irradiance on the module plane, W/m².
fn irradiance_at(hour: f64, peak: f64) -> f64 {
    if hour <= SUNRISE_H || hour >= SUNSET_H {
        return 0.0;
    }
    let phase = std::f64::consts::PI * (hour - SUNRISE_H) / (SUNSET_H - SUNRISE_H);
    peak * phase.sin().powf(1.5)
}

/// Outdoor temperature, °C: 8 °C before dawn, 20 °C mid-afternoon.
fn ambient_at(hour: f64) -> f64 {
    14.0 + 6.0 * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin()
}

/// Generate the bundled synthetic forecast: morning and evening hot-water and
/// demand peaks, a bell-shaped PV day driven through the PV model, and the
/// configured price curve. Sigmas follow `config.noise`.
pub fn generate_synthetic_profiles(config: &ProfileConfig) -> Result<ForecastSeries> {
    config.validate()?;
    let per_day = config.steps_per_day()?;
    let hours: Vec<f64> = (0..per_day)
        .map(|i| (i as f64 + 0.5) * config.dt / 3600.0)
        .collect();

    let water_shape: Vec<f64> = hours
        .iter()
        .map(|&h| {
            WATER_EVENTS
                .iter()
                .map(|&(c, w, share)| share * daily_bump(h, c, w))
                .sum::<f64>()
        })
        .collect();
    // scale events and base separately so each keeps its share of the day
    let event_total: f64 = water_shape.iter().sum();
    let event_share: f64 = WATER_EVENTS.iter().map(|e| e.2).sum();
    let water_day: Vec<f64> = water_shape
        .iter()
        .map(|&s| {
            config.water_daily_kg
                * (event_share * s / event_total + WATER_BASE_SHARE / per_day as f64)
        })
        .collect();

    let mut points = Vec::with_capacity(per_day * config.days);
    for day in 0..config.days {
        let weather = config.weather[day % config.weather.len()];
        for (i, &h) in hours.iter().enumerate() {
            let irradiance = weather * irradiance_at(h, config.peak_irradiance);
            let pv = pv_power(irradiance, ambient_at(h), &config.pv)?;
            let el = config.el_scale
                * (EL_BASE_W
                    + EL_EVENTS
                        .iter()
                        .map(|&(c, w, peak)| peak * daily_bump(h, c, w))
                        .sum::<f64>());
            let price = match config.price {
                PriceCurve::Flat(p) => p,
                PriceCurve::DayNight {
                    day,
                    night,
                    day_start_h,
                    day_end_h,
                } => {
                    if h >= day_start_h && h < day_end_h {
                        day
                    } else {
                        night
                    }
                }
            };
            let point = ForecastPoint {
                water_pred: water_day[i],
                pv_pred: pv,
                el_pred: el,
                price_pred: price,
                ..ForecastPoint::default()
            };
            points.push(noise_sigmas_with(point, &config.noise));
        }
    }
    ForecastSeries::new(config.dt, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_lengths() {
        let s = generate_synthetic_profiles(&ProfileConfig::default()).unwrap();
        assert_eq!(s.len(), 288);
        let hourly = ProfileConfig {
            days: 1,
            dt: 3600.0,
            ..ProfileConfig::default()
        };
        assert_eq!(generate_synthetic_profiles(&hourly).unwrap().len(), 24);
    }

    #[test]
    fn synthetic_shape_properties() {
        let cfg = ProfileConfig::default();
        let s = generate_synthetic_profiles(&cfg).unwrap();
        // midnight steps of every day have no PV
        for day in 0..3 {
            assert_eq!(s.points[day * 96].pv_pred, 0.0);
            assert_eq!(s.points[day * 96 + 95].pv_pred, 0.0);
        }
        let day_total: f64 = s.points[..96].iter().map(|p| p.water_pred).sum();
        assert!((day_total - cfg.water_daily_kg).abs() < 1e-9);
        // noon PV stays below the array rating
        let noon = s.points[52].pv_pred;
        assert!(noon > 0.0 && noon < cfg.pv.rated_power());
        for p in &s.points {
            assert!((p.water_sigma - 2.0 / 3.0 * p.water_pred).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_profile_config() {
        let bad_dt = ProfileConfig {
            dt: 0.0,
            ..ProfileConfig::default()
        };
        assert!(generate_synthetic_profiles(&bad_dt).is_err());
        let bad_days = ProfileConfig {
            days: 0,
            ..ProfileConfig::default()
        };
        assert!(generate_synthetic_profiles(&bad_days).is_err());
        let uneven = ProfileConfig {
            dt: 7000.0,
            ..ProfileConfig::default()
        };
        assert!(generate_synthetic_profiles(&uneven).is_err());
    }

    #[test]
    fn noise_sigma_examples() {
        let p = noise_sigmas(ForecastPoint {
            water_pred: 3.0,
            pv_pred: 0.0,
            el_pred: 600.0,
            price_pred: 0.30,
            ..ForecastPoint::default()
        });
        assert!((p.water_sigma - 2.0).abs() < 1e-12);
        assert_eq!(p.pv_sigma, 0.0);
        assert!((p.el_sigma - 200.0).abs() < 1e-9);
        assert!((p.price_sigma - 0.50).abs() < 1e-12);
    }

    #[test]
    fn zero_sigma_realization_equals_means() {
        let s = generate_synthetic_profiles(&ProfileConfig::default())
            .unwrap()
            .without_noise();
        let r = realize(&s, 7);
        assert_eq!(r, Realization::from_means(&s, 7));
    }

    #[test]
    fn realization_is_seeded_and_clipped() {
        let s = generate_synthetic_profiles(&ProfileConfig::default()).unwrap();
        let a = realize(&s, 11);
        assert_eq!(a, realize(&s, 11));
        assert_ne!(a, realize(&s, 12));
        assert!(a
            .points
            .iter()
            .all(|p| p.water >= 0.0 && p.pv >= 0.0 && p.el >= 0.0));
        // with sigma = 2/3 mean, negative raw draws do occur and get clipped
        let raw = sample_unclipped(&s, 11);
        assert!(raw.iter().any(|p| p.water < 0.0));
    }

    #[test]
    fn sampler_mean_matches() {
        let n = 100_000;
        let point = ForecastPoint {
            water_pred: 3.0,
            water_sigma: 2.0,
            ..ForecastPoint::default()
        };
        let s = ForecastSeries::new(900.0, vec![point; n]).unwrap();
        let raw = sample_unclipped(&s, 2024);
        let mean = raw.iter().map(|p| p.water).sum::<f64>() / n as f64;
        assert!(
            (mean - 3.0).abs() < 3.0 * 2.0 / (n as f64).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn csv_round_trip() {
        let s = generate_synthetic_profiles(&ProfileConfig::default()).unwrap();
        let back = ForecastSeries::from_csv(&s.to_csv("h")).unwrap();
        assert_eq!(back, s);
        let r = realize(&s, 5);
        assert_eq!(Realization::from_csv(&r.to_csv("h")).unwrap(), r);
    }
}
