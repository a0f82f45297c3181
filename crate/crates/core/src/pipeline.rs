//! generate → reduce → optimize → report, as driven by the command line.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::artifacts::{self, LedgerTable, ProfitRow};
use crate::domain::{load_case, DispatchLedger, MicrogridSpec, Schedule, CASE33_JSON};
use crate::error::{Error, Result};
use crate::evaluation::expected_profit;
use crate::optimizer::{optimize, optimize_per_scenario, OptimizeResult, PsoConfig};
use crate::reduction::reduce;
use crate::stochastics::{generate_scenarios, ScenarioSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// One schedule per reduced scenario.
    PerScenario,
    /// One schedule against all reduced scenarios.
    Expected,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-scenario" => Ok(Self::PerScenario),
            "expected" => Ok(Self::Expected),
            other => Err(Error::validation(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::PerScenario => "per-scenario",
            Self::Expected => "expected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineArgs {
    pub config: PathBuf,
    pub scenarios: usize,
    pub reduce: usize,
    pub seed: u64,
    pub mode: Mode,
    pub out: PathBuf,
    pub swarm: usize,
    pub iters: usize,
}

impl PipelineArgs {
    pub fn pso_config(&self) -> PsoConfig {
        PsoConfig {
            swarm_size: self.swarm,
            iterations: self.iters,
            seed: self.seed,
            ..PsoConfig::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub generate_ms: u128,
    pub reduce_ms: u128,
    pub optimize_ms: u128,
    pub report_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PathBuf,
    pub seed: u64,
    pub n_generated: usize,
    pub n_reduced: usize,
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub swarm: usize,
    pub iters: usize,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub manifest: RunManifest,
    pub reduced: ScenarioSet,
    pub profits: Vec<ProfitRow>,
    pub expected_profit: f64,
    /// Index (into the reduced set) of the scenario with the highest
    /// penalized profit.
    pub best: usize,
    pub schedule: Schedule,
    pub ledger: DispatchLedger,
    /// Total violation of the reported schedule under the best scenario.
    pub best_violation: f64,
    pub report: String,
}

/// Reads a configuration. `case33` (with or without `.json`) names the
/// bundled case when no such file exists.
pub fn read_config(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            let name = path.to_string_lossy();
            if name == "case33" || name == "case33.json" {
                Ok(CASE33_JSON.to_string())
            } else {
                Err(Error::MissingConfig(path.to_path_buf()))
            }
        }
        Err(e) => Err(e.into()),
    }
}

/// Exit status for a failed run: 2 for unusable input, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::MissingConfig(_)
        | Error::Parse { .. }
        | Error::Validation(_)
        | Error::Domain(_)
        | Error::Consistency(_) => 2,
        _ => 1,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn ms(since: Instant) -> u128 {
    since.elapsed().as_millis()
}

pub fn run_pipeline(args: &PipelineArgs) -> Result<PipelineOutcome> {
    let case = load_case(&read_config(&args.config)?)?;
    let forecast = case
        .forecast
        .ok_or_else(|| Error::validation("configuration has no `forecast` section"))?;
    let spec = case.spec;
    let pso = args.pso_config();
    pso.validate()?;
    if args.reduce == 0 || args.reduce > args.scenarios {
        return Err(Error::domain(format!(
            "--reduce {} must lie in 1..={}",
            args.reduce, args.scenarios
        )));
    }
    fs::create_dir_all(&args.out)?;
    let mut timings = StageTimings::default();

    let t0 = Instant::now();
    let generated = generate_scenarios(&spec, &forecast, args.scenarios, args.seed)?;
    timings.generate_ms = ms(t0);

    let t0 = Instant::now();
    let (reduced, reduction) = reduce(&generated, args.reduce)?;
    timings.reduce_ms = ms(t0);

    let t0 = Instant::now();
    let results = match args.mode {
        Mode::PerScenario => optimize_per_scenario(&spec, &reduced, &pso)?,
        Mode::Expected => vec![optimize(&spec, &reduced, &pso)?],
    };
    timings.optimize_ms = ms(t0);

    let t0 = Instant::now();
    let summary = summarize(&reduced, args.mode, &results, args.pso_config().penalty)?;
    let report = report(&spec, &summary.ledger, &summary.schedule);

    artifacts::write_scenarios(&generated, create(&args.out, "scenarios.csv")?)?;
    artifacts::write_scenarios(&reduced, create(&args.out, "reduced.csv")?)?;
    serde_json::to_writer_pretty(create(&args.out, "reduction.json")?, &reduction)?;
    artifacts::write_schedule(&spec, &summary.schedule, create(&args.out, "schedule.csv")?)?;
    LedgerTable::new(&spec, &summary.schedule, &summary.ledger)
        .write_csv(create(&args.out, "ledger.csv")?)?;
    artifacts::write_profits(&summary.profits, create(&args.out, "profits.csv")?)?;
    artifacts::write_trace(&summary.trace, create(&args.out, "trace.csv")?)?;
    fs::write(args.out.join("expected_profit.txt"), format!("{}\n", summary.expected_profit))?;
    timings.report_ms = ms(t0);

    let manifest = RunManifest {
        config: args.config.clone(),
        seed: args.seed,
        n_generated: generated.len(),
        n_reduced: reduced.len(),
        mode: args.mode,
        output_dir: args.out.clone(),
        swarm: args.swarm,
        iters: args.iters,
        timings,
    };
    serde_json::to_writer_pretty(create(&args.out, "manifest.json")?, &manifest)?;

    Ok(PipelineOutcome {
        manifest,
        reduced,
        profits: summary.profits,
        expected_profit: summary.expected_profit,
        best: summary.best,
        schedule: summary.schedule,
        ledger: summary.ledger,
        best_violation: summary.best_violation,
        report,
    })
}

struct Summary {
    profits: Vec<ProfitRow>,
    expected_profit: f64,
    best: usize,
    schedule: Schedule,
    ledger: DispatchLedger,
    best_violation: f64,
    trace: Vec<f64>,
}

/// The best scenario is the one with the highest penalized profit, which is
/// simply the highest profit when every schedule is feasible.
fn summarize(
    reduced: &ScenarioSet,
    mode: Mode,
    results: &[OptimizeResult],
    penalty: f64,
) -> Result<Summary> {
    // per-scenario: results[i] holds scenario i alone; expected: one shared result
    let pick = |i: usize| match mode {
        Mode::PerScenario => (&results[i], 0),
        Mode::Expected => (&results[0], i),
    };
    let profits: Vec<ProfitRow> = reduced
        .scenarios()
        .iter()
        .enumerate()
        .map(|(i, sc)| {
            let (r, k) = pick(i);
            ProfitRow {
                scenario: i,
                probability: sc.probability,
                profit: r.profits[k],
                violation: r.feasibility[k].total_violation,
            }
        })
        .collect();
    let values: Vec<f64> = profits.iter().map(|p| p.profit).collect();
    let expected = expected_profit(&values, &reduced.probabilities())?;
    let scores: Vec<f64> = profits.iter().map(|p| p.profit - penalty * p.violation).collect();
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    let (r, k) = pick(best);
    Ok(Summary {
        expected_profit: expected,
        best,
        schedule: r.schedule.clone(),
        ledger: r.ledgers[k].clone(),
        best_violation: r.feasibility[k].total_violation,
        trace: r.trace.clone(),
        profits,
    })
}

/// Human-readable commitment/storage table and dispatch/money table.
pub fn report(spec: &MicrogridSpec, ledger: &DispatchLedger, schedule: &Schedule) -> String {
    let table = LedgerTable::new(spec, schedule, ledger);
    let mut s = String::new();
    let _ = write!(s, "{:>4}", "Hour");
    for g in &table.generators {
        let _ = write!(s, " {g:>5}");
    }
    for e in 0..spec.storages.len() {
        let name = if spec.storages.len() == 1 { "ESS".to_string() } else { format!("ESS{}", e + 1) };
        let _ = write!(s, " {name:>5}");
    }
    s.push('\n');
    for t in 0..schedule.horizon() {
        let _ = write!(s, "{:>4}", t + 1);
        for on in &schedule.gen_on {
            let _ = write!(s, " {:>5}", u8::from(on[t]));
        }
        for st in &schedule.ess_state {
            let code = st[t].code().map_or_else(|| "?".to_string(), |c| c.to_string());
            let _ = write!(s, " {code:>5}");
        }
        s.push('\n');
    }
    s.push('\n');

    let _ = write!(s, "{:>5}", "Hour");
    for g in &table.generators {
        let _ = write!(s, " {:>8}", g);
    }
    let _ = writeln!(
        s,
        " {:>11} {:>11} {:>11} {:>11} {:>11}",
        "Gen cost", "Emission", "Import", "Revenue", "Profit"
    );
    for r in &table.rows {
        let _ = write!(s, "{:>5}", r.hour);
        for p in &r.dispatch {
            let _ = write!(s, " {p:>8.1}");
        }
        let _ = writeln!(
            s,
            " {:>11.2} {:>11.2} {:>11.2} {:>11.2} {:>11.2}",
            r.gen_cost, r.emission_cost, r.import_cost, r.revenue, r.profit
        );
    }
    let _ = writeln!(
        s,
        "Total cost {:.2}  revenue {:.2}  profit {:.2}",
        table.total_cost, table.total_revenue, table.total_profit
    );
    s
}
