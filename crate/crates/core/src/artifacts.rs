//! CSV/JSON artifacts: scenario sets, schedules, ledgers, profit tables and
//! convergence traces. Every CSV written here parses back with the matching
//! reader; floats use the shortest representation that round-trips.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::{DispatchLedger, EssState, MicrogridSpec, Schedule};
use crate::error::{Error, Result};
use crate::stochastics::{Scenario, ScenarioSet};

fn field(rec: &csv::StringRecord, i: usize) -> Result<&str> {
    rec.get(i).ok_or_else(|| Error::Artifact(format!("missing column {i}")))
}

fn num(rec: &csv::StringRecord, i: usize) -> Result<f64> {
    let s = field(rec, i)?;
    s.trim().parse().map_err(|_| Error::Artifact(format!("column {i}: `{s}` is not a number")))
}

fn int(rec: &csv::StringRecord, i: usize) -> Result<i64> {
    let s = field(rec, i)?;
    s.trim().parse().map_err(|_| Error::Artifact(format!("column {i}: `{s}` is not an integer")))
}

fn flag(rec: &csv::StringRecord, i: usize) -> Result<bool> {
    match int(rec, i)? {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(Error::Artifact(format!("column {i}: flag must be 0 or 1, got {v}"))),
    }
}

pub const SCENARIO_HEADER: [&str; 6] = ["scenario", "hour", "wind_kw", "pv_kw", "load_kw", "probability"];

/// One row per scenario-hour, hours numbered from 1.
pub fn write_scenarios<W: Write>(set: &ScenarioSet, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SCENARIO_HEADER)?;
    for (i, s) in set.scenarios().iter().enumerate() {
        for h in 0..s.horizon() {
            out.write_record([
                i.to_string(),
                (h + 1).to_string(),
                s.wind_power[h].to_string(),
                s.pv_power[h].to_string(),
                s.load[h].to_string(),
                s.probability.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_scenarios<R: Read>(r: R) -> Result<ScenarioSet> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut scenarios: Vec<Scenario> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let idx = int(&rec, 0)? as usize;
        if idx == scenarios.len() {
            scenarios.push(Scenario {
                wind_power: Vec::new(),
                pv_power: Vec::new(),
                load: Vec::new(),
                probability: num(&rec, 5)?,
            });
        } else if idx + 1 != scenarios.len() {
            return Err(Error::Artifact(format!("scenario index {idx} out of order")));
        }
        let s = scenarios.last_mut().expect("pushed above");
        if int(&rec, 1)? as usize != s.load.len() + 1 {
            return Err(Error::Artifact(format!("scenario {idx}: hours out of order")));
        }
        s.wind_power.push(num(&rec, 2)?);
        s.pv_power.push(num(&rec, 3)?);
        s.load.push(num(&rec, 4)?);
    }
    ScenarioSet::new(scenarios)
}

fn gen_names(spec: &MicrogridSpec) -> Vec<String> {
    spec.generators
        .iter()
        .enumerate()
        .map(|(i, g)| if g.name.is_empty() { format!("G{}", i + 1) } else { g.name.clone() })
        .collect()
}

fn ess_names(spec: &MicrogridSpec) -> Vec<String> {
    let n = spec.storages.len();
    spec.storages
        .iter()
        .enumerate()
        .map(|(i, s)| match (s.name.is_empty(), n) {
            (false, _) => s.name.clone(),
            (true, 1) => "ESS".to_string(),
            (true, _) => format!("ESS{}", i + 1),
        })
        .collect()
}

/// Hour-indexed rows: commitment flags and storage modes first (−1 charge,
/// 0 idle, 1 discharge), then the sell flag, powers, state of charge and
/// grid exchange.
pub fn write_schedule<W: Write>(spec: &MicrogridSpec, schedule: &Schedule, w: W) -> Result<()> {
    schedule.check_shape(spec)?;
    let gens = gen_names(spec);
    let ess = ess_names(spec);
    let mut header = vec!["Hour".to_string()];
    header.extend(gens.iter().cloned());
    header.extend(ess.iter().cloned());
    header.push("r".into());
    header.extend(gens.iter().map(|g| format!("P_{g}")));
    header.extend(ess.iter().map(|e| format!("P_{e}")));
    header.extend(ess.iter().map(|e| format!("SOC_{e}")));
    header.push("P_grid".into());

    let mut out = csv::Writer::from_writer(w);
    out.write_record(&header)?;
    for t in 0..spec.horizon {
        let mut row = vec![(t + 1).to_string()];
        row.extend(schedule.gen_on.iter().map(|on| u8::from(on[t]).to_string()));
        for st in &schedule.ess_state {
            let code = st[t]
                .code()
                .ok_or_else(|| Error::Artifact(format!("hour {}: storage both charging and discharging", t + 1)))?;
            row.push(code.to_string());
        }
        row.push(u8::from(schedule.sell[t]).to_string());
        row.extend(schedule.gen_power.iter().map(|p| p[t].to_string()));
        row.extend(schedule.ess_power.iter().map(|p| p[t].to_string()));
        row.extend(schedule.soc.iter().map(|s| s[t].to_string()));
        row.push(schedule.grid_power[t].to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_schedule<R: Read>(spec: &MicrogridSpec, r: R) -> Result<Schedule> {
    let ng = spec.generators.len();
    let ne = spec.storages.len();
    let mut s = Schedule::idle(spec);
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let t = int(&rec, 0)? as usize;
        if t != rows + 1 || t > spec.horizon {
            return Err(Error::Artifact(format!("unexpected hour {t}")));
        }
        let h = t - 1;
        let mut c = 1;
        for i in 0..ng {
            s.gen_on[i][h] = flag(&rec, c)?;
            c += 1;
        }
        for e in 0..ne {
            let code = int(&rec, c)?;
            s.ess_state[e][h] = i8::try_from(code)
                .ok()
                .and_then(EssState::from_code)
                .ok_or_else(|| Error::Artifact(format!("bad storage mode {code}")))?;
            c += 1;
        }
        s.sell[h] = flag(&rec, c)?;
        c += 1;
        for i in 0..ng {
            s.gen_power[i][h] = num(&rec, c)?;
            c += 1;
        }
        for e in 0..ne {
            s.ess_power[e][h] = num(&rec, c)?;
            c += 1;
        }
        for e in 0..ne {
            s.soc[e][h] = num(&rec, c)?;
            c += 1;
        }
        s.grid_power[h] = num(&rec, c)?;
        rows += 1;
    }
    if rows != spec.horizon {
        return Err(Error::Artifact(format!("expected {} hours, found {rows}", spec.horizon)));
    }
    Ok(s)
}

/// One row of the dispatch/monetary table. Generation cost includes
/// startup and shutdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub hour: usize,
    pub dispatch: Vec<f64>,
    pub gen_cost: f64,
    pub emission_cost: f64,
    pub import_cost: f64,
    pub revenue: f64,
    pub profit: f64,
}

impl LedgerRow {
    /// Profit recomputed from the monetary columns.
    pub fn implied_profit(&self) -> f64 {
        self.revenue - (self.gen_cost + self.emission_cost + self.import_cost)
    }
}

/// Hourly dispatch and money table with a totals row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerTable {
    pub generators: Vec<String>,
    pub rows: Vec<LedgerRow>,
    pub total_cost: f64,
    pub total_revenue: f64,
    pub total_profit: f64,
}

impl LedgerTable {
    pub fn new(spec: &MicrogridSpec, schedule: &Schedule, ledger: &DispatchLedger) -> Self {
        let rows = ledger
            .hours
            .iter()
            .enumerate()
            .map(|(t, h)| LedgerRow {
                hour: t + 1,
                dispatch: schedule.gen_power.iter().map(|p| p[t]).collect(),
                gen_cost: h.generation_cost(),
                emission_cost: h.emission_cost,
                import_cost: h.import_cost,
                revenue: h.revenue,
                profit: h.profit,
            })
            .collect();
        Self {
            generators: gen_names(spec),
            rows,
            total_cost: ledger.totals.total_cost(),
            total_revenue: ledger.totals.revenue,
            total_profit: ledger.totals.profit,
        }
    }

    pub fn column_sums(&self) -> (f64, f64, f64) {
        let cost = self.rows.iter().map(|r| r.gen_cost + r.emission_cost + r.import_cost).sum();
        let rev = self.rows.iter().map(|r| r.revenue).sum();
        let profit = self.rows.iter().map(|r| r.profit).sum();
        (cost, rev, profit)
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["Hour".to_string()];
        h.extend(self.generators.iter().cloned());
        h.extend(
            ["Gen cost", "Emission cost", "Energy import cost", "Total revenue", "Profit"]
                .map(String::from),
        );
        h
    }

    /// The last row is `Total`: horizon cost sits in the import-cost column,
    /// followed by total revenue and total profit.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for r in &self.rows {
            let mut row = vec![r.hour.to_string()];
            row.extend(r.dispatch.iter().map(f64::to_string));
            row.extend([r.gen_cost, r.emission_cost, r.import_cost, r.revenue, r.profit].map(|x| x.to_string()));
            out.write_record(&row)?;
        }
        let mut total = vec!["Total".to_string()];
        total.extend(self.generators.iter().map(|_| String::new()));
        total.extend([String::new(), String::new(), self.total_cost.to_string()]);
        total.extend([self.total_revenue.to_string(), self.total_profit.to_string()]);
        out.write_record(&total)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 6 {
            return Err(Error::Artifact("ledger header too short".into()));
        }
        let ng = header.len() - 6;
        let generators = header.iter().skip(1).take(ng).map(String::from).collect();
        let mut rows = Vec::new();
        let mut totals = None;
        for rec in rdr.records() {
            let rec = rec?;
            if field(&rec, 0)? == "Total" {
                totals = Some((num(&rec, ng + 3)?, num(&rec, ng + 4)?, num(&rec, ng + 5)?));
                continue;
            }
            rows.push(LedgerRow {
                hour: int(&rec, 0)? as usize,
                dispatch: (0..ng).map(|i| num(&rec, 1 + i)).collect::<Result<_>>()?,
                gen_cost: num(&rec, ng + 1)?,
                emission_cost: num(&rec, ng + 2)?,
                import_cost: num(&rec, ng + 3)?,
                revenue: num(&rec, ng + 4)?,
                profit: num(&rec, ng + 5)?,
            });
        }
        let (total_cost, total_revenue, total_profit) =
            totals.ok_or_else(|| Error::Artifact("ledger has no Total row".into()))?;
        Ok(Self { generators, rows, total_cost, total_revenue, total_profit })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitRow {
    pub scenario: usize,
    pub probability: f64,
    pub profit: f64,
    pub violation: f64,
}

pub fn write_profits<W: Write>(rows: &[ProfitRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_profits<R: Read>(r: R) -> Result<Vec<ProfitRow>> {
    csv::Reader::from_reader(r).deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub best_fitness: f64,
}

pub fn write_trace<W: Write>(trace: &[f64], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for (i, &f) in trace.iter().enumerate() {
        out.serialize(TracePoint { iteration: i + 1, best_fitness: f })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> Result<Vec<f64>> {
    csv::Reader::from_reader(r)
        .deserialize::<TracePoint>()
        .map(|p| p.map(|p| p.best_fitness).map_err(Error::from))
        .collect()
}
