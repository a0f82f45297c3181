//! Time-varying acceleration coefficient particle swarm (TVAC-PSO) over the
//! schedule encoding in [`encoding`].
//!
//! Box limits, storage mode exclusivity and minimum up/down times hold by
//! construction of the decoder. Power balance, state of charge, ramps and
//! storage minimum run times are penalized: fitness is expected profit minus
//! `penalty · E[total violation]`.

pub mod encoding;

pub use encoding::{decode, Encoding};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DispatchLedger, MicrogridSpec, Schedule};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, FeasibilityReport};
use crate::stochastics::{derive_seed, ScenarioSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub w_start: f64,
    pub w_end: f64,
    pub c1_start: f64,
    pub c1_end: f64,
    pub c2_start: f64,
    pub c2_end: f64,
    /// Maximum step per iteration as a fraction of each coordinate's range.
    pub velocity_clamp: f64,
    /// $ per kW of weighted constraint violation. Must exceed the largest
    /// price so that a shortfall never pays.
    pub penalty: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 50,
            iterations: 500,
            w_start: 0.9,
            w_end: 0.4,
            c1_start: 2.5,
            c1_end: 0.5,
            c2_start: 0.5,
            c2_end: 2.5,
            velocity_clamp: 0.2,
            penalty: 10.0,
            seed: 42,
        }
    }
}

impl PsoConfig {
    // negated checks so NaN is rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::validation("swarm_size must be >= 2"));
        }
        if self.iterations < 1 {
            return Err(Error::validation("iterations must be >= 1"));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::validation("penalty weight must be > 0"));
        }
        if !(self.velocity_clamp > 0.0) {
            return Err(Error::validation("velocity clamp must be > 0"));
        }
        Ok(())
    }

    /// Inertia and acceleration coefficients at iteration `k`, each moving
    /// linearly from its start value to its end value.
    pub fn coefficients(&self, k: usize) -> (f64, f64, f64) {
        let f = k as f64 / self.iterations as f64;
        let lerp = |a: f64, b: f64| a + (b - a) * f;
        (
            lerp(self.w_start, self.w_end),
            lerp(self.c1_start, self.c1_end),
            lerp(self.c2_start, self.c2_end),
        )
    }
}

/// Penalized expected profit of a decoded schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    pub value: f64,
    pub expected_profit: f64,
    pub expected_violation: f64,
}

fn score(spec: &MicrogridSpec, schedule: &Schedule, scenarios: &ScenarioSet, penalty: f64) -> Result<Fitness> {
    let mut profit = 0.0;
    let mut violation = 0.0;
    for sc in scenarios.scenarios() {
        let ev = evaluate(spec, schedule, sc)?;
        profit += sc.probability * ev.ledger.profit();
        violation += sc.probability * ev.feasibility.total_violation;
    }
    Ok(Fitness { value: profit - penalty * violation, expected_profit: profit, expected_violation: violation })
}

pub fn fitness_detail(
    spec: &MicrogridSpec,
    position: &[f64],
    scenarios: &ScenarioSet,
    penalty: f64,
) -> Result<Fitness> {
    let schedule = decode(position, spec)?;
    score(spec, &schedule, scenarios, penalty)
}

/// Expected profit minus `penalty` times the expected total violation.
pub fn fitness(spec: &MicrogridSpec, position: &[f64], scenarios: &ScenarioSet, penalty: f64) -> Result<f64> {
    Ok(fitness_detail(spec, position, scenarios, penalty)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub schedule: Schedule,
    pub position: Vec<f64>,
    /// Penalized objective of the best position.
    pub fitness: f64,
    pub expected_profit: f64,
    /// Profit of the best schedule under each scenario, in set order.
    pub profits: Vec<f64>,
    pub ledgers: Vec<DispatchLedger>,
    pub feasibility: Vec<FeasibilityReport>,
    /// Best fitness after each iteration.
    pub trace: Vec<f64>,
}

impl OptimizeResult {
    pub fn expected_violation(&self, scenarios: &ScenarioSet) -> f64 {
        scenarios
            .scenarios()
            .iter()
            .zip(&self.feasibility)
            .map(|(s, f)| s.probability * f.total_violation)
            .sum()
    }
}

struct Swarm {
    position: Vec<Vec<f64>>,
    velocity: Vec<Vec<f64>>,
    best_position: Vec<Vec<f64>>,
    best_fitness: Vec<f64>,
    global: usize,
}

/// Maximizes penalized expected profit over `scenarios` with one shared
/// schedule. Deterministic for a fixed seed regardless of thread count.
pub fn optimize(spec: &MicrogridSpec, scenarios: &ScenarioSet, config: &PsoConfig) -> Result<OptimizeResult> {
    if scenarios.is_empty() {
        return Err(Error::domain("scenario set is empty"));
    }
    if scenarios.horizon() != spec.horizon {
        return Err(Error::consistency("scenario horizon does not match spec"));
    }
    config.validate()?;

    let enc = Encoding::for_spec(spec);
    let bounds = enc.bounds();
    let vmax: Vec<f64> = bounds.iter().map(|(lo, hi)| config.velocity_clamp * (hi - lo)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let evaluate_all = |xs: &[Vec<f64>]| -> Result<Vec<f64>> {
        xs.par_iter().map(|x| fitness(spec, x, scenarios, config.penalty)).collect()
    };

    let position: Vec<Vec<f64>> = (0..config.swarm_size)
        .map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect())
        .collect();
    let velocity: Vec<Vec<f64>> = (0..config.swarm_size)
        .map(|_| vmax.iter().map(|&v| rng.random_range(-v..=v)).collect())
        .collect();
    let fit = evaluate_all(&position)?;
    let mut swarm = Swarm {
        best_position: position.clone(),
        position,
        velocity,
        global: argmax(&fit),
        best_fitness: fit,
    };

    let mut trace = Vec::with_capacity(config.iterations);
    for k in 0..config.iterations {
        let (w, c1, c2) = config.coefficients(k);
        let gbest = swarm.best_position[swarm.global].clone();
        for p in 0..config.swarm_size {
            let x = &mut swarm.position[p];
            let v = &mut swarm.velocity[p];
            let pbest = &swarm.best_position[p];
            for d in 0..x.len() {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let nv = w * v[d] + c1 * r1 * (pbest[d] - x[d]) + c2 * r2 * (gbest[d] - x[d]);
                v[d] = nv.clamp(-vmax[d], vmax[d]);
                let (lo, hi) = bounds[d];
                let nx = x[d] + v[d];
                if nx < lo || nx > hi {
                    // stop at the wall and bounce back
                    x[d] = nx.clamp(lo, hi);
                    v[d] = -v[d];
                } else {
                    x[d] = nx;
                }
            }
        }
        let fit = evaluate_all(&swarm.position)?;
        for (p, &f) in fit.iter().enumerate() {
            if f > swarm.best_fitness[p] {
                swarm.best_fitness[p] = f;
                swarm.best_position[p].clone_from(&swarm.position[p]);
            }
        }
        swarm.global = argmax(&swarm.best_fitness);
        trace.push(swarm.best_fitness[swarm.global]);
    }

    let position = swarm.best_position[swarm.global].clone();
    let schedule = decode(&position, spec)?;
    let evals = scenarios
        .scenarios()
        .iter()
        .map(|sc| evaluate(spec, &schedule, sc))
        .collect::<Result<Vec<_>>>()?;
    let profits: Vec<f64> = evals.iter().map(|e| e.ledger.profit()).collect();
    let fit = score(spec, &schedule, scenarios, config.penalty)?;
    let (ledgers, feasibility) = evals.into_iter().map(|e| (e.ledger, e.feasibility)).unzip();
    Ok(OptimizeResult {
        schedule,
        position,
        fitness: fit.value,
        expected_profit: fit.expected_profit,
        profits,
        ledgers,
        feasibility,
        trace,
    })
}

/// First index of the maximum.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Optimizes a separate schedule for every scenario, each treated as
/// certain. Scenario `i` runs with a seed derived from `(config.seed, i)`.
pub fn optimize_per_scenario(
    spec: &MicrogridSpec,
    scenarios: &ScenarioSet,
    config: &PsoConfig,
) -> Result<Vec<OptimizeResult>> {
    if scenarios.is_empty() {
        return Err(Error::domain("scenario set is empty"));
    }
    scenarios
        .scenarios()
        .par_iter()
        .enumerate()
        .map(|(i, sc)| {
            let single = ScenarioSet::single(sc.clone())?;
            let cfg = PsoConfig { seed: derive_seed(config.seed, &[i as u64]), ..config.clone() };
            optimize(spec, &single, &cfg)
        })
        .collect()
}
