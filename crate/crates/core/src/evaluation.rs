//! Prices a schedule against one scenario and measures constraint breaches.

use serde::{Deserialize, Serialize};

use crate::domain::{soc_trajectory, DispatchLedger, Generator, LedgerHour, MicrogridSpec, Schedule};
use crate::error::{Error, Result};
use crate::stochastics::{Scenario, PROBABILITY_TOLERANCE};

/// Quadratic fuel cost `a + b·p + c·p²` of a committed unit, in $.
pub fn fuel_cost(g: &Generator, p: f64) -> f64 {
    g.a + g.b * p + g.c * p * p
}

pub fn emission_cost(g: &Generator, p: f64) -> f64 {
    g.emission_price * g.emission_factor * p
}

/// Revenue of one hour: served load at the market price plus exported
/// energy at the exchange price when selling.
pub fn revenue(spec: &MicrogridSpec, schedule: &Schedule, scenario: &Scenario, hour: usize) -> f64 {
    let mut rv = spec.prices.market_price[hour] * scenario.load[hour];
    if schedule.sell[hour] {
        rv += spec.prices.exchange_price[hour] * schedule.grid_power[hour];
    }
    rv
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HourCost {
    pub fuel: f64,
    pub startup: f64,
    pub shutdown: f64,
    pub emission: f64,
    pub import: f64,
}

impl HourCost {
    pub fn total(&self) -> f64 {
        self.fuel + self.startup + self.shutdown + self.emission + self.import
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub hours: Vec<HourCost>,
    pub total: f64,
}

fn check_dims(spec: &MicrogridSpec, schedule: &Schedule, scenario: &Scenario) -> Result<()> {
    schedule.check_shape(spec)?;
    let t = spec.horizon;
    if scenario.wind_power.len() != t || scenario.pv_power.len() != t || scenario.load.len() != t {
        return Err(Error::consistency(format!(
            "scenario horizon {} does not match spec horizon {t}",
            scenario.horizon()
        )));
    }
    Ok(())
}

/// Operating cost over the horizon. Startup is charged on each 0→1
/// commitment transition and shutdown on each 1→0, with every unit off
/// before the first hour.
pub fn total_cost(spec: &MicrogridSpec, schedule: &Schedule, scenario: &Scenario) -> Result<CostBreakdown> {
    check_dims(spec, schedule, scenario)?;
    let hours: Vec<HourCost> = (0..spec.horizon).map(|t| hour_cost(spec, schedule, t)).collect();
    let total = hours.iter().map(HourCost::total).sum();
    Ok(CostBreakdown { hours, total })
}

fn hour_cost(spec: &MicrogridSpec, schedule: &Schedule, t: usize) -> HourCost {
    let mut c = HourCost::default();
    for (i, g) in spec.generators.iter().enumerate() {
        let on = schedule.gen_on[i][t];
        let was_on = t > 0 && schedule.gen_on[i][t - 1];
        let p = schedule.gen_power[i][t];
        if on {
            c.fuel += fuel_cost(g, p);
        }
        c.emission += emission_cost(g, p);
        if on && !was_on {
            c.startup += g.startup_cost;
        }
        if !on && was_on {
            c.shutdown += g.shutdown_cost;
        }
    }
    if !schedule.sell[t] {
        c.import = spec.prices.exchange_price[t] * schedule.grid_power[t];
    }
    c
}

/// Profit of a schedule under one scenario, with the hourly ledger.
pub fn scenario_profit(spec: &MicrogridSpec, schedule: &Schedule, scenario: &Scenario) -> Result<DispatchLedger> {
    let costs = total_cost(spec, schedule, scenario)?;
    let hours = costs
        .hours
        .iter()
        .enumerate()
        .map(|(t, c)| {
            LedgerHour::new(
                c.fuel,
                c.startup,
                c.shutdown,
                c.emission,
                c.import,
                revenue(spec, schedule, scenario, t),
            )
        })
        .collect();
    Ok(DispatchLedger::from_hours(hours))
}

/// Probability-weighted profit across scenarios.
pub fn expected_profit(profits: &[f64], probabilities: &[f64]) -> Result<f64> {
    if profits.len() != probabilities.len() {
        return Err(Error::domain(format!(
            "{} profits but {} probabilities",
            profits.len(),
            probabilities.len()
        )));
    }
    let mass: f64 = probabilities.iter().sum();
    if (mass - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(Error::domain(format!("probabilities sum to {mass}, expected 1")));
    }
    Ok(profits.iter().zip(probabilities).map(|(f, p)| f * p).sum())
}

/// Magnitude of every constraint breach. Units: kW for power, kWh for
/// state of charge, hours for minimum-time rules, mode-hours for the
/// charge/discharge exclusivity rule. `total_violation` weighs each
/// hour-type breach by the rated power of the unit involved (at least 1 kW),
/// so all of its terms are in kW.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Supply shortfall against load plus loss, per hour.
    pub power_balance: Vec<f64>,
    pub generator_limits: f64,
    pub grid_limits: f64,
    pub storage_limits: f64,
    pub storage_exclusivity: f64,
    pub soc_bounds: f64,
    pub min_up_time: f64,
    pub min_down_time: f64,
    pub min_charge_time: f64,
    pub min_discharge_time: f64,
    pub ramp: f64,
    pub total_violation: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.total_violation == 0.0
    }

    pub fn power_balance_total(&self) -> f64 {
        self.power_balance.iter().sum()
    }

    /// Time-type breaches enter `total_violation` scaled by `weighted_time`,
    /// which already holds them in kW.
    fn finalize(mut self, weighted_time: f64) -> Self {
        self.total_violation = self.power_balance_total()
            + self.generator_limits
            + self.grid_limits
            + self.storage_limits
            + self.soc_bounds
            + self.ramp
            + weighted_time;
        self
    }
}

fn outside(x: f64, lo: f64, hi: f64) -> f64 {
    (lo - x).max(0.0) + (x - hi).max(0.0)
}

/// Shortfall of every run of `true` that starts inside the horizon against
/// `min_len`. A run starts at `t` when `flags[t]` holds and the previous
/// hour (or `before` for the first hour) did not. Runs cut by the end of
/// the horizon count with their in-horizon length.
pub fn short_run_hours(flags: &[bool], min_len: u32, before: bool) -> f64 {
    let mut total = 0.0;
    let mut t = 0;
    while t < flags.len() {
        if flags[t] {
            let start = t;
            while t < flags.len() && flags[t] {
                t += 1;
            }
            let prev = if start == 0 { before } else { flags[start - 1] };
            if !prev {
                total += (min_len as f64 - (t - start) as f64).max(0.0);
            }
        } else {
            t += 1;
        }
    }
    total
}

/// Measures every constraint breach of `schedule` under `scenario`.
/// Never fails on infeasibility; only dimension mismatches are errors.
pub fn check_feasibility(spec: &MicrogridSpec, schedule: &Schedule, scenario: &Scenario) -> Result<FeasibilityReport> {
    check_dims(spec, schedule, scenario)?;
    Ok(feasibility_unchecked(spec, schedule, scenario))
}

fn feasibility_unchecked(spec: &MicrogridSpec, schedule: &Schedule, scenario: &Scenario) -> FeasibilityReport {
    let horizon = spec.horizon;
    let mut rep = FeasibilityReport { power_balance: vec![0.0; horizon], ..Default::default() };
    let mut weighted_time = 0.0;

    for (i, g) in spec.generators.iter().enumerate() {
        let on = &schedule.gen_on[i];
        let p = &schedule.gen_power[i];
        for t in 0..horizon {
            rep.generator_limits +=
                if on[t] { outside(p[t], g.p_min, g.p_max) } else { p[t].abs() };
            if t > 0 && on[t] && on[t - 1] {
                rep.ramp += (p[t] - p[t - 1] - g.ramp_up).max(0.0);
                rep.ramp += (p[t - 1] - p[t] - g.ramp_down).max(0.0);
            }
        }
        let off: Vec<bool> = on.iter().map(|x| !x).collect();
        let up = short_run_hours(on, g.min_up_time, false);
        let down = short_run_hours(&off, g.min_down_time, true);
        rep.min_up_time += up;
        rep.min_down_time += down;
        weighted_time += g.p_max.max(1.0) * (up + down);
    }

    for (e, unit) in spec.storages.iter().enumerate() {
        let states = &schedule.ess_state[e];
        let power = &schedule.ess_power[e];
        let rating = unit.charge_max.max(unit.discharge_max).max(1.0);
        for (s, &p) in states.iter().zip(power) {
            if s.charging && s.discharging {
                rep.storage_exclusivity += 1.0;
                weighted_time += rating;
            }
            if s.charging {
                rep.storage_limits += outside(p, unit.charge_min, unit.charge_max);
            }
            if s.discharging {
                rep.storage_limits += outside(p, unit.discharge_min, unit.discharge_max);
            }
            if !s.charging && !s.discharging {
                rep.storage_limits += p.abs();
            }
        }
        let soc = soc_trajectory(unit, states, power);
        rep.soc_bounds += soc.iter().map(|&x| outside(x, 0.0, unit.soc_max)).sum::<f64>();
        let charging: Vec<bool> = states.iter().map(|s| s.charging).collect();
        let discharging: Vec<bool> = states.iter().map(|s| s.discharging).collect();
        let mc = short_run_hours(&charging, unit.min_charge_time, false);
        let md = short_run_hours(&discharging, unit.min_discharge_time, false);
        rep.min_charge_time += mc;
        rep.min_discharge_time += md;
        weighted_time += unit.charge_max.max(1.0) * mc + unit.discharge_max.max(1.0) * md;
    }

    for t in 0..horizon {
        let grid = schedule.grid_power[t];
        rep.grid_limits += outside(grid, spec.grid_min.max(0.0), spec.grid_max);
        rep.power_balance[t] = (demand(spec, scenario, t) - supply(spec, schedule, scenario, t)).max(0.0);
    }
    rep.finalize(weighted_time)
}

fn demand(spec: &MicrogridSpec, scenario: &Scenario, t: usize) -> f64 {
    scenario.load[t] + spec.loss(t)
}

/// Net injection into the microgrid bus in hour `t`, kW.
fn supply(spec: &MicrogridSpec, schedule: &Schedule, scenario: &Scenario, t: usize) -> f64 {
    let mut s = scenario.renewable(t);
    for i in 0..spec.generators.len() {
        if schedule.gen_on[i][t] {
            s += schedule.gen_power[i][t];
        }
    }
    for e in 0..spec.storages.len() {
        let st = schedule.ess_state[e][t];
        let p = schedule.ess_power[e][t];
        if st.discharging {
            s += p;
        }
        if st.charging {
            s -= p;
        }
    }
    if schedule.sell[t] {
        s - schedule.grid_power[t]
    } else {
        s + schedule.grid_power[t]
    }
}

/// Ledger and feasibility of one schedule under one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub ledger: DispatchLedger,
    pub feasibility: FeasibilityReport,
}

pub fn evaluate(spec: &MicrogridSpec, schedule: &Schedule, scenario: &Scenario) -> Result<Evaluation> {
    let ledger = scenario_profit(spec, schedule, scenario)?;
    let feasibility = feasibility_unchecked(spec, schedule, scenario);
    Ok(Evaluation { ledger, feasibility })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{load_spec, EssState, CASE33_JSON};

    fn case() -> MicrogridSpec {
        load_spec(CASE33_JSON).unwrap()
    }

    fn flat_scenario(load: f64, t: usize) -> Scenario {
        Scenario {
            wind_power: vec![0.0; t],
            pv_power: vec![0.0; t],
            load: vec![load; t],
            probability: 1.0,
        }
    }

    #[test]
    fn fuel_cost_golden_values() {
        let spec = case();
        let g = &spec.generators;
        assert!((fuel_cost(&g[0], 300.0) - 277.0).abs() < 1e-9);
        assert!((fuel_cost(&g[0], 300.0) + fuel_cost(&g[2], 250.0) - 547.0).abs() < 1e-9);
        let h14 = fuel_cost(&g[0], 300.0) + fuel_cost(&g[1], 150.0) + fuel_cost(&g[2], 300.0);
        assert!((h14 - 1049.5).abs() < 1e-9);
    }

    #[test]
    fn off_unit_costs_nothing() {
        let spec = case();
        let sched = Schedule::idle(&spec);
        let costs = total_cost(&spec, &sched, &flat_scenario(0.0, 24)).unwrap();
        assert_eq!(costs.total, 0.0);
    }

    #[test]
    fn single_startup_is_charged_once() {
        let spec = case();
        let mut sched = Schedule::idle(&spec);
        for t in 4..24 {
            sched.gen_on[1][t] = true;
            sched.gen_power[1][t] = 0.0;
        }
        let costs = total_cost(&spec, &sched, &flat_scenario(0.0, 24)).unwrap();
        let su: f64 = costs.hours.iter().map(|h| h.startup).sum();
        let sd: f64 = costs.hours.iter().map(|h| h.shutdown).sum();
        assert_eq!(su, 1.9);
        assert_eq!(sd, 0.0);
        assert_eq!(costs.hours[4].startup, 1.9);
    }

    #[test]
    fn served_load_revenue() {
        let spec = case();
        let sched = Schedule::idle(&spec);
        let sc = flat_scenario(1000.0, 24);
        assert!((revenue(&spec, &sched, &sc, 0) - 600.0).abs() < 1e-9);
        assert_eq!(revenue(&spec, &sched, &flat_scenario(0.0, 24), 0), 0.0);
    }

    #[test]
    fn grid_direction_gates_revenue_and_cost() {
        let spec = case();
        let mut sched = Schedule::idle(&spec);
        let sc = flat_scenario(0.0, 24);
        sched.grid_power[3] = 100.0;
        let buy = scenario_profit(&spec, &sched, &sc).unwrap();
        assert!((buy.hours[3].import_cost - 110.0).abs() < 1e-9);
        assert_eq!(buy.hours[3].revenue, 0.0);
        sched.sell[3] = true;
        let sell = scenario_profit(&spec, &sched, &sc).unwrap();
        assert_eq!(sell.hours[3].import_cost, 0.0);
        assert!((sell.hours[3].revenue - 110.0).abs() < 1e-9);
    }

    #[test]
    fn zero_prices_give_negative_cost() {
        let mut spec = case();
        spec.prices.market_price = vec![0.0; 24];
        spec.prices.exchange_price = vec![0.0; 24];
        let mut sched = Schedule::idle(&spec);
        sched.gen_on[0] = vec![true; 24];
        sched.gen_power[0] = vec![100.0; 24];
        let sc = flat_scenario(80.0, 24);
        let ledger = scenario_profit(&spec, &sched, &sc).unwrap();
        let cost = total_cost(&spec, &sched, &sc).unwrap().total;
        assert!((ledger.profit() + cost).abs() < 1e-9);
    }

    #[test]
    fn emission_is_linear() {
        let g = &case().generators[0];
        assert!((emission_cost(g, 200.0) - 2.0 * emission_cost(g, 100.0)).abs() < 1e-15);
        assert!((emission_cost(g, 300.0) - 0.018).abs() < 1e-12);
    }

    #[test]
    fn expected_profit_weighting() {
        assert_eq!(expected_profit(&[100.0, 200.0], &[0.25, 0.75]).unwrap(), 175.0);
        assert_eq!(expected_profit(&[5.0; 4], &[0.25; 4]).unwrap(), 5.0);
        assert!(matches!(expected_profit(&[1.0, 2.0], &[0.5, 0.6]), Err(Error::Domain(_))));
        assert!(matches!(expected_profit(&[1.0], &[0.5, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn simultaneous_charge_and_discharge_is_one_breach() {
        let spec = case();
        let mut sched = Schedule::idle(&spec);
        sched.ess_state[0][5] = EssState { charging: true, discharging: true };
        sched.ess_power[0][5] = 10.0;
        let rep = check_feasibility(&spec, &sched, &flat_scenario(0.0, 24)).unwrap();
        assert_eq!(rep.storage_exclusivity, 1.0);
        // one exclusivity hour and one short run of each mode, 50 kW rating
        assert_eq!(rep.min_charge_time, 1.0);
        assert_eq!(rep.min_discharge_time, 1.0);
        assert_eq!(rep.total_violation, 3.0 * 50.0);
    }

    #[test]
    fn short_on_pulse_breaks_min_up_and_down() {
        let mut spec = case();
        spec.horizon = 3;
        spec.prices.market_price.truncate(3);
        spec.prices.exchange_price.truncate(3);
        spec.loss_profile.truncate(3);
        spec.generators[0].min_up_time = 3;
        spec.generators[0].min_down_time = 3;
        let mut sched = Schedule::idle(&spec);
        sched.gen_on[0] = vec![false, true, false];
        sched.gen_power[0] = vec![0.0, 300.0, 0.0];
        let rep = check_feasibility(&spec, &sched, &flat_scenario(0.0, 3)).unwrap();
        assert_eq!(rep.min_up_time, 2.0);
        assert_eq!(rep.min_down_time, 2.0);
        assert_eq!(rep.total_violation, 300.0 * 4.0);
    }

    #[test]
    fn run_lengths() {
        assert_eq!(short_run_hours(&[true, true, false, true], 3, false), 1.0 + 2.0);
        assert_eq!(short_run_hours(&[true, true, false, true], 3, true), 2.0);
        assert_eq!(short_run_hours(&[false; 5], 4, false), 0.0);
    }

    #[test]
    fn soc_and_balance_breaches() {
        let spec = case();
        let mut sched = Schedule::idle(&spec);
        sched.ess_state[0][0] = EssState::DISCHARGE;
        sched.ess_state[0][1] = EssState::DISCHARGE;
        sched.ess_power[0][0] = 20.0;
        sched.ess_power[0][1] = 20.0;
        let rep = check_feasibility(&spec, &sched, &flat_scenario(50.0, 24)).unwrap();
        // soc -20, then -40 for the remaining 23 hours
        assert_eq!(rep.soc_bounds, 20.0 + 40.0 * 23.0);
        assert_eq!(rep.power_balance[0], 30.0);
        assert_eq!(rep.power_balance[5], 50.0);
    }

    #[test]
    fn horizon_mismatch_is_consistency_error() {
        let spec = case();
        let sched = Schedule::idle(&spec);
        let err = total_cost(&spec, &sched, &flat_scenario(1.0, 12)).unwrap_err();
        assert!(matches!(err, Error::Consistency(_)));
    }
}
