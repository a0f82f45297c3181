//! Static plant data and the schedule/ledger types shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastics::ForecastProfile;

/// Dispatchable thermal unit.
///
/// Fuel cost follows `a + b·P + c·P²` while committed; emission cost is
/// `emission_price · emission_factor · P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(default)]
    pub name: String,
    /// kW
    pub p_min: f64,
    /// kW
    pub p_max: f64,
    /// $
    pub a: f64,
    /// $/kW
    pub b: f64,
    /// $/kW²
    pub c: f64,
    /// $ per 0→1 commitment transition
    pub startup_cost: f64,
    /// $ per 1→0 commitment transition
    pub shutdown_cost: f64,
    /// hours
    pub min_up_time: u32,
    /// hours
    pub min_down_time: u32,
    /// kW/h
    pub ramp_up: f64,
    /// kW/h
    pub ramp_down: f64,
    /// kg/kWh
    pub emission_factor: f64,
    /// $/kg
    pub emission_price: f64,
}

fn unit_efficiency() -> f64 {
    1.0
}

/// Battery storage. Power limits are magnitudes; the mode picks which pair
/// applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    #[serde(default)]
    pub name: String,
    pub charge_min: f64,
    pub charge_max: f64,
    pub discharge_min: f64,
    pub discharge_max: f64,
    /// kWh
    pub capacity: f64,
    /// kWh
    pub soc_max: f64,
    /// hours
    pub min_charge_time: u32,
    /// hours
    pub min_discharge_time: u32,
    /// One-way efficiency applied to both charging and discharging.
    #[serde(default = "unit_efficiency")]
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindUnit {
    #[serde(default)]
    pub name: String,
    pub v_cut_in: f64,
    pub v_rated: f64,
    pub v_cut_out: f64,
    pub p_rated: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvUnit {
    #[serde(default)]
    pub name: String,
    /// Rated output at standard test conditions, kW.
    pub p_stc: f64,
    /// W/m²
    pub g_stc: f64,
    /// Cell temperature, °C. Held constant per unit.
    pub t_cell: f64,
    /// Maximum power temperature coefficient, 1/°C.
    pub k_temp: f64,
}

/// Hourly energy prices in $/kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceProfile {
    /// Price consumers pay for served load.
    pub market_price: Vec<f64>,
    /// Price of energy bought from or sold to the upstream network.
    pub exchange_price: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrogridSpec {
    pub horizon: usize,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub storages: Vec<StorageUnit>,
    #[serde(default)]
    pub wind_units: Vec<WindUnit>,
    #[serde(default)]
    pub pv_units: Vec<PvUnit>,
    pub prices: PriceProfile,
    /// Limits on the exchanged power magnitude, kW.
    pub grid_min: f64,
    pub grid_max: f64,
    /// Exogenous network loss per hour, kWh. Empty means no losses.
    #[serde(default)]
    pub loss_profile: Vec<f64>,
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(what()))
    }
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

impl Generator {
    pub fn validate(&self, idx: usize) -> Result<()> {
        let id = || format!("generators[{idx}]");
        check(finite_nonneg(self.p_min) && self.p_min <= self.p_max && self.p_max.is_finite(), || {
            format!("{}: requires 0 <= p_min <= p_max (got {} / {})", id(), self.p_min, self.p_max)
        })?;
        for (field, v) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("startup_cost", self.startup_cost),
            ("shutdown_cost", self.shutdown_cost),
            ("emission_factor", self.emission_factor),
            ("emission_price", self.emission_price),
        ] {
            check(finite_nonneg(v), || format!("{}.{field}: cost terms must be >= 0 (got {v})", id()))?;
        }
        check(self.ramp_up > 0.0 && self.ramp_down > 0.0, || {
            format!("{}: ramp rates must be > 0", id())
        })
    }
}

impl StorageUnit {
    pub fn validate(&self, idx: usize) -> Result<()> {
        let id = || format!("storages[{idx}]");
        check(finite_nonneg(self.charge_min) && self.charge_min <= self.charge_max, || {
            format!("{}: requires 0 <= charge_min <= charge_max", id())
        })?;
        check(
            finite_nonneg(self.discharge_min) && self.discharge_min <= self.discharge_max,
            || format!("{}: requires 0 <= discharge_min <= discharge_max", id()),
        )?;
        check(self.soc_max > 0.0 && self.soc_max <= self.capacity, || {
            format!("{}: requires 0 < soc_max <= capacity", id())
        })?;
        check(self.efficiency > 0.0 && self.efficiency <= 1.0, || {
            format!("{}: efficiency must lie in (0, 1]", id())
        })
    }
}

impl WindUnit {
    pub fn validate(&self, idx: usize) -> Result<()> {
        check(
            0.0 < self.v_cut_in && self.v_cut_in < self.v_rated && self.v_rated < self.v_cut_out,
            || format!("wind_units[{idx}]: requires 0 < v_cut_in < v_rated < v_cut_out"),
        )?;
        check(self.p_rated > 0.0, || format!("wind_units[{idx}]: p_rated must be > 0"))
    }
}

impl PvUnit {
    pub fn validate(&self, idx: usize) -> Result<()> {
        check(self.p_stc > 0.0 && self.g_stc > 0.0, || {
            format!("pv_units[{idx}]: p_stc and g_stc must be > 0")
        })
    }
}

impl MicrogridSpec {
    /// Checks every invariant and fills an empty loss profile with zeros.
    pub fn validated(mut self) -> Result<Self> {
        if self.loss_profile.is_empty() {
            self.loss_profile = vec![0.0; self.horizon];
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.horizon >= 1, || "horizon must be >= 1".into())?;
        for (i, g) in self.generators.iter().enumerate() {
            g.validate(i)?;
        }
        for (i, s) in self.storages.iter().enumerate() {
            s.validate(i)?;
        }
        for (i, w) in self.wind_units.iter().enumerate() {
            w.validate(i)?;
        }
        for (i, p) in self.pv_units.iter().enumerate() {
            p.validate(i)?;
        }
        let t = self.horizon;
        check(
            self.prices.market_price.len() == t && self.prices.exchange_price.len() == t,
            || format!("prices: both profiles must have length {t}"),
        )?;
        check(
            self.prices
                .market_price
                .iter()
                .chain(&self.prices.exchange_price)
                .all(|&p| finite_nonneg(p)),
            || "prices: all prices must be >= 0".into(),
        )?;
        check(self.grid_min <= self.grid_max, || {
            format!("grid_min ({}) must not exceed grid_max ({})", self.grid_min, self.grid_max)
        })?;
        check(self.loss_profile.len() == t, || {
            format!("loss_profile must have length {t}")
        })?;
        check(self.loss_profile.iter().all(|&l| finite_nonneg(l)), || {
            "loss_profile must be >= 0 elementwise".into()
        })
    }

    pub fn loss(&self, hour: usize) -> f64 {
        self.loss_profile.get(hour).copied().unwrap_or(0.0)
    }
}

/// On-disk case document: plant data, an optional forecast profile, and
/// free-form notes about where values came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    pub microgrid: MicrogridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast: Option<ForecastProfile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// A validated case: plant data plus the forecast used for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub spec: MicrogridSpec,
    pub forecast: Option<ForecastProfile>,
}

/// The bundled 33-bus case study.
pub const CASE33_JSON: &str = include_str!("../data/case33.json");

fn parse_document(content: &str) -> Result<CaseDocument> {
    let de = &mut serde_json::Deserializer::from_str(content);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn load_case(content: &str) -> Result<Case> {
    let doc = parse_document(content)?;
    let spec = doc.microgrid.validated()?;
    if let Some(f) = &doc.forecast {
        f.validate(spec.horizon)?;
    }
    Ok(Case { spec, forecast: doc.forecast })
}

pub fn load_spec(content: &str) -> Result<MicrogridSpec> {
    Ok(load_case(content)?.spec)
}

/// Serializes a spec as a case document accepted by [`load_spec`].
pub fn spec_to_json(spec: &MicrogridSpec) -> Result<String> {
    let doc = CaseDocument { microgrid: spec.clone(), forecast: None, notes: Vec::new() };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Charge/discharge flags of one storage unit in one hour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssState {
    pub charging: bool,
    pub discharging: bool,
}

impl EssState {
    pub const IDLE: Self = Self { charging: false, discharging: false };
    pub const CHARGE: Self = Self { charging: true, discharging: false };
    pub const DISCHARGE: Self = Self { charging: false, discharging: true };

    /// −1 charging, 0 idle, +1 discharging. `None` when both flags are set.
    pub fn code(self) -> Option<i8> {
        match (self.charging, self.discharging) {
            (false, false) => Some(0),
            (true, false) => Some(-1),
            (false, true) => Some(1),
            (true, true) => None,
        }
    }

    pub fn from_code(code: i8) -> Option<Self> {
        match code {
            -1 => Some(Self::CHARGE),
            0 => Some(Self::IDLE),
            1 => Some(Self::DISCHARGE),
            _ => None,
        }
    }
}

/// Hourly decisions for the whole plant. Unit-indexed tables are laid out
/// `[unit][hour]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub gen_on: Vec<Vec<bool>>,
    /// kW, zero whenever the unit is off.
    pub gen_power: Vec<Vec<f64>>,
    pub ess_state: Vec<Vec<EssState>>,
    /// kW, magnitude of the charge or discharge power.
    pub ess_power: Vec<Vec<f64>>,
    /// kWh at the end of each hour.
    pub soc: Vec<Vec<f64>>,
    /// `true` when the microgrid sells to the upstream network.
    pub sell: Vec<bool>,
    /// kW, magnitude of the exchanged power.
    pub grid_power: Vec<f64>,
}

impl Schedule {
    /// Everything off, storage idle, no exchange.
    pub fn idle(spec: &MicrogridSpec) -> Self {
        let t = spec.horizon;
        let ng = spec.generators.len();
        let ne = spec.storages.len();
        Self {
            gen_on: vec![vec![false; t]; ng],
            gen_power: vec![vec![0.0; t]; ng],
            ess_state: vec![vec![EssState::IDLE; t]; ne],
            ess_power: vec![vec![0.0; t]; ne],
            soc: vec![vec![0.0; t]; ne],
            sell: vec![false; t],
            grid_power: vec![0.0; t],
        }
    }

    pub fn horizon(&self) -> usize {
        self.sell.len()
    }

    /// Recomputes the state of charge from the storage powers, starting empty.
    pub fn refresh_soc(&mut self, spec: &MicrogridSpec) {
        for (e, unit) in spec.storages.iter().enumerate() {
            self.soc[e] = soc_trajectory(unit, &self.ess_state[e], &self.ess_power[e]);
        }
    }

    pub fn check_shape(&self, spec: &MicrogridSpec) -> Result<()> {
        let t = spec.horizon;
        let ng = spec.generators.len();
        let ne = spec.storages.len();
        let rows_ok = |rows: usize, want: usize| rows == want;
        let ok = rows_ok(self.gen_on.len(), ng)
            && rows_ok(self.gen_power.len(), ng)
            && rows_ok(self.ess_state.len(), ne)
            && rows_ok(self.ess_power.len(), ne)
            && rows_ok(self.soc.len(), ne)
            && self.gen_on.iter().all(|r| r.len() == t)
            && self.gen_power.iter().all(|r| r.len() == t)
            && self.ess_state.iter().all(|r| r.len() == t)
            && self.ess_power.iter().all(|r| r.len() == t)
            && self.soc.iter().all(|r| r.len() == t)
            && self.sell.len() == t
            && self.grid_power.len() == t;
        if ok {
            Ok(())
        } else {
            Err(Error::consistency(format!(
                "schedule shape does not match spec ({ng} generators, {ne} storages, {t} hours)"
            )))
        }
    }
}

/// State of charge after each hour with `soc_t = soc_{t-1} + η·P_c − P_d/η`.
pub fn soc_trajectory(unit: &StorageUnit, states: &[EssState], power: &[f64]) -> Vec<f64> {
    let eta = unit.efficiency;
    let mut soc = 0.0;
    states
        .iter()
        .zip(power)
        .map(|(s, &p)| {
            if s.charging {
                soc += eta * p;
            }
            if s.discharging {
                soc -= p / eta;
            }
            soc
        })
        .collect()
}

/// Money flows of one hour, in $.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerHour {
    pub fuel_cost: f64,
    pub startup_cost: f64,
    pub shutdown_cost: f64,
    pub emission_cost: f64,
    pub import_cost: f64,
    pub revenue: f64,
    pub profit: f64,
}

impl LedgerHour {
    pub fn new(
        fuel_cost: f64,
        startup_cost: f64,
        shutdown_cost: f64,
        emission_cost: f64,
        import_cost: f64,
        revenue: f64,
    ) -> Self {
        let mut h = Self {
            fuel_cost,
            startup_cost,
            shutdown_cost,
            emission_cost,
            import_cost,
            revenue,
            profit: 0.0,
        };
        h.profit = revenue - h.total_cost();
        h
    }

    pub fn total_cost(&self) -> f64 {
        self.fuel_cost + self.startup_cost + self.shutdown_cost + self.emission_cost + self.import_cost
    }

    /// Fuel plus startup and shutdown.
    pub fn generation_cost(&self) -> f64 {
        self.fuel_cost + self.startup_cost + self.shutdown_cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchLedger {
    pub hours: Vec<LedgerHour>,
    pub totals: LedgerHour,
}

impl DispatchLedger {
    pub fn from_hours(hours: Vec<LedgerHour>) -> Self {
        let mut sum = [0.0f64; 6];
        for h in &hours {
            sum[0] += h.fuel_cost;
            sum[1] += h.startup_cost;
            sum[2] += h.shutdown_cost;
            sum[3] += h.emission_cost;
            sum[4] += h.import_cost;
            sum[5] += h.revenue;
        }
        let totals = LedgerHour::new(sum[0], sum[1], sum[2], sum[3], sum[4], sum[5]);
        Self { hours, totals }
    }

    pub fn profit(&self) -> f64 {
        self.totals.profit
    }
}
