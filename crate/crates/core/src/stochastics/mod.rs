//! Distribution fitting, sampling, and conversion of sampled weather/load
//! into per-scenario power profiles.

mod gamma;

pub use gamma::gamma;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Weibull};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{MicrogridSpec, PvUnit, WindUnit};
use crate::error::{Error, Result};

/// Tolerance on the probability mass of a scenario set.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullParams {
    pub shape: f64,
    /// m/s
    pub scale: f64,
}

impl WeibullParams {
    pub fn mean(&self) -> f64 {
        self.scale * gamma(1.0 + 1.0 / self.shape)
    }

    pub fn pdf(&self, v: f64) -> f64 {
        weibull_pdf(*self, v)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Weibull::new(self.scale, self.shape)
            .expect("validated weibull parameters")
            .sample(rng)
    }
}

/// Fits a Weibull distribution to a forecast mean and standard deviation
/// using the empirical shape relation `(σ/v̄)^-1.086`.
pub fn weibull_from_moments(v_mean: f64, sigma: f64) -> Result<WeibullParams> {
    if !(v_mean.is_finite() && v_mean > 0.0) {
        return Err(Error::domain(format!("weibull fit needs v_mean > 0 (got {v_mean})")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!("weibull fit needs sigma > 0 (got {sigma})")));
    }
    let shape = (sigma / v_mean).powf(-1.086);
    let scale = v_mean / gamma(1.0 + 1.0 / shape);
    Ok(WeibullParams { shape, scale })
}

pub fn weibull_pdf(params: WeibullParams, v: f64) -> f64 {
    if v < 0.0 {
        return 0.0;
    }
    let WeibullParams { shape, scale } = params;
    let z = v / scale;
    (shape / scale) * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalParams {
    pub mean: f64,
    pub std: f64,
}

impl NormalParams {
    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * self.std)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.std == 0.0 {
            return self.mean;
        }
        Normal::new(self.mean, self.std)
            .expect("validated normal parameters")
            .sample(rng)
    }
}

/// Turbine output for wind speed `v` (m/s), in kW. The quadratic region is
/// clamped to `[0, p_rated]`.
pub fn wind_power(unit: &WindUnit, v: f64) -> f64 {
    if v < unit.v_cut_in || v > unit.v_cut_out {
        0.0
    } else if v < unit.v_rated {
        let per_unit = unit.k1 + unit.k2 * v + unit.k3 * v * v;
        (per_unit * unit.p_rated).clamp(0.0, unit.p_rated)
    } else {
        unit.p_rated
    }
}

/// PV output for irradiance `g_ing` (W/m²) and air temperature `t_air` (°C),
/// in kW, never negative.
pub fn pv_power(unit: &PvUnit, g_ing: f64, t_air: f64) -> f64 {
    let p = unit.p_stc * (g_ing / unit.g_stc) * (1.0 + unit.k_temp * (unit.t_cell - t_air));
    p.max(0.0)
}

/// Hourly mean and standard deviation of one uncertain quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyForecast {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl HourlyForecast {
    pub fn constant(mean: f64, std: f64, horizon: usize) -> Self {
        Self { mean: vec![mean; horizon], std: vec![std; horizon] }
    }

    fn validate(&self, what: &str, horizon: usize, nonneg_mean: bool) -> Result<()> {
        if self.mean.len() != horizon || self.std.len() != horizon {
            return Err(Error::validation(format!(
                "forecast.{what}: mean and std must have length {horizon}"
            )));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::validation(format!("forecast.{what}: std must be >= 0")));
        }
        if self.mean.iter().any(|m| !m.is_finite() || (nonneg_mean && *m < 0.0)) {
            return Err(Error::validation(format!("forecast.{what}: invalid mean")));
        }
        Ok(())
    }

    fn at(&self, hour: usize) -> NormalParams {
        NormalParams { mean: self.mean[hour], std: self.std[hour] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastProfile {
    /// m/s
    pub wind_speed: HourlyForecast,
    /// W/m²
    pub irradiance: HourlyForecast,
    /// °C
    pub air_temperature: HourlyForecast,
    /// kW
    pub load: HourlyForecast,
}

impl ForecastProfile {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        self.wind_speed.validate("wind_speed", horizon, true)?;
        self.irradiance.validate("irradiance", horizon, true)?;
        self.air_temperature.validate("air_temperature", horizon, false)?;
        self.load.validate("load", horizon, true)
    }

    pub fn horizon(&self) -> usize {
        self.load.mean.len()
    }
}

/// One joint hourly realization of renewable output and demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// kW per hour
    pub wind_power: Vec<f64>,
    /// kW per hour
    pub pv_power: Vec<f64>,
    /// kW per hour
    pub load: Vec<f64>,
    pub probability: f64,
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.load.len()
    }

    pub fn renewable(&self, hour: usize) -> f64 {
        self.wind_power[hour] + self.pv_power[hour]
    }

    /// Concatenated (wind, pv, load) hourly values.
    pub fn features(&self) -> impl Iterator<Item = f64> + '_ {
        self.wind_power.iter().chain(&self.pv_power).chain(&self.load).copied()
    }

    fn validate(&self, idx: usize, horizon: usize) -> Result<()> {
        if self.wind_power.len() != horizon
            || self.pv_power.len() != horizon
            || self.load.len() != horizon
        {
            return Err(Error::validation(format!(
                "scenario {idx}: every profile must have length {horizon}"
            )));
        }
        if self.features().any(|x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::validation(format!("scenario {idx}: negative or non-finite power")));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::validation(format!(
                "scenario {idx}: probability {} outside [0, 1]",
                self.probability
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    /// Builds a set, checking shapes and that the probabilities sum to one.
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        let horizon = scenarios.first().map_or(0, Scenario::horizon);
        for (i, s) in scenarios.iter().enumerate() {
            s.validate(i, horizon)?;
        }
        let mass: f64 = scenarios.iter().map(|s| s.probability).sum();
        if scenarios.is_empty() || (mass - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::validation(format!(
                "scenario probabilities sum to {mass}, expected 1"
            )));
        }
        Ok(Self { scenarios })
    }

    /// A set holding one certain scenario.
    pub fn single(mut scenario: Scenario) -> Result<Self> {
        scenario.probability = 1.0;
        Self::new(vec![scenario])
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.scenarios[0].horizon()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    pub fn into_scenarios(self) -> Vec<Scenario> {
        self.scenarios
    }
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Quantity {
    WindSpeed = 1,
    Irradiance = 2,
    AirTemperature = 3,
    Load = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit stream key from a seed and a path of labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

fn stream(seed: u64, scenario: usize, hour: usize, q: Quantity) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[scenario as u64, hour as u64, q as u64]))
}

fn sample_wind_speed(f: NormalParams, rng: &mut ChaCha8Rng) -> Result<f64> {
    if f.std == 0.0 || f.mean == 0.0 {
        return Ok(f.mean);
    }
    Ok(weibull_from_moments(f.mean, f.std)?.sample(rng))
}

fn sample_scenario(
    spec: &MicrogridSpec,
    forecast: &ForecastProfile,
    index: usize,
    seed: u64,
    probability: f64,
) -> Result<Scenario> {
    let t = spec.horizon;
    let mut wind = Vec::with_capacity(t);
    let mut pv = Vec::with_capacity(t);
    let mut load = Vec::with_capacity(t);
    for h in 0..t {
        let v = sample_wind_speed(
            forecast.wind_speed.at(h),
            &mut stream(seed, index, h, Quantity::WindSpeed),
        )?;
        let g = forecast
            .irradiance
            .at(h)
            .sample(&mut stream(seed, index, h, Quantity::Irradiance))
            .max(0.0);
        let temp = forecast
            .air_temperature
            .at(h)
            .sample(&mut stream(seed, index, h, Quantity::AirTemperature));
        let l = forecast
            .load
            .at(h)
            .sample(&mut stream(seed, index, h, Quantity::Load))
            .max(0.0);
        wind.push(spec.wind_units.iter().map(|u| wind_power(u, v)).sum());
        pv.push(spec.pv_units.iter().map(|u| pv_power(u, g, temp)).sum());
        load.push(l);
    }
    Ok(Scenario { wind_power: wind, pv_power: pv, load, probability })
}

/// Monte Carlo scenario generation: `n` equiprobable joint realizations,
/// each hour and quantity drawn from its own seeded stream.
pub fn generate_scenarios(
    spec: &MicrogridSpec,
    forecast: &ForecastProfile,
    n: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(Error::domain("scenario count must be >= 1"));
    }
    forecast.validate(spec.horizon)?;
    let p = 1.0 / n as f64;
    let scenarios = (0..n)
        .into_par_iter()
        .map(|i| sample_scenario(spec, forecast, i, seed, p))
        .collect::<Result<Vec<_>>>()?;
    ScenarioSet::new(scenarios)
}
