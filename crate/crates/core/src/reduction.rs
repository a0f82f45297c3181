//! Fast-forward scenario selection.
//!
//! Scenarios are picked greedily: each round takes the not-yet-selected
//! scenario with the smallest probability-weighted distance to the other
//! unselected scenarios, then tightens the distance matrix against the pick.
//! Once enough scenarios are selected, each deleted scenario hands its
//! probability to the nearest survivor.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastics::{Scenario, ScenarioSet};

/// Distance between the concatenated (wind, pv, load) hourly vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[default]
    L1,
    L2,
}

impl Metric {
    pub fn distance(self, a: &Scenario, b: &Scenario) -> f64 {
        let diffs = a.features().zip(b.features()).map(|(x, y)| x - y);
        match self {
            Metric::L1 => diffs.map(f64::abs).sum(),
            Metric::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        }
    }
}

/// Dense, row-major `n × n` matrix of scenario distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

pub fn cost_matrix(set: &ScenarioSet) -> Result<CostMatrix> {
    cost_matrix_with(set, Metric::L1)
}

pub fn cost_matrix_with(set: &ScenarioSet, metric: Metric) -> Result<CostMatrix> {
    let n = set.len();
    if n < 2 {
        return Err(Error::domain(format!("cost matrix needs at least 2 scenarios (got {n})")));
    }
    let sc = set.scenarios();
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..n).map(move |j| if i == j { 0.0 } else { metric.distance(&sc[i], &sc[j]) })
        })
        .collect();
    Ok(CostMatrix { n, data })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    /// Selected scenario indices in the order they were picked.
    pub selected: Vec<usize>,
    /// Deleted scenario indices, ascending.
    pub deleted: Vec<usize>,
    /// Redistributed probability of each entry of `selected`.
    pub probabilities: Vec<f64>,
    /// Deleted index → the selected index that absorbed its probability.
    pub assignment: BTreeMap<usize, usize>,
}

/// Greedy selection state. Exposed so the per-round matrices can be inspected.
#[derive(Debug, Clone)]
pub struct FastForward {
    original: CostMatrix,
    current: CostMatrix,
    probabilities: Vec<f64>,
    selected: Vec<usize>,
    is_selected: Vec<bool>,
}

impl FastForward {
    pub fn new(set: &ScenarioSet, metric: Metric) -> Result<Self> {
        let original = cost_matrix_with(set, metric)?;
        Ok(Self::from_matrix(original, set.probabilities()))
    }

    pub fn from_matrix(costs: CostMatrix, probabilities: Vec<f64>) -> Self {
        let n = costs.len();
        Self {
            current: costs.clone(),
            original: costs,
            probabilities,
            selected: Vec::new(),
            is_selected: vec![false; n],
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Distance matrix after the updates of every round so far.
    pub fn current_costs(&self) -> &CostMatrix {
        &self.current
    }

    pub fn original_costs(&self) -> &CostMatrix {
        &self.original
    }

    /// Weighted distance `d_ω` of every unselected candidate.
    pub fn candidate_distances(&self) -> Vec<(usize, f64)> {
        let n = self.current.len();
        (0..n)
            .filter(|&w| !self.is_selected[w])
            .map(|w| {
                let row = self.current.row(w);
                let d = (0..n)
                    .filter(|&v| v != w && !self.is_selected[v])
                    .map(|v| self.probabilities[v] * row[v])
                    .sum();
                (w, d)
            })
            .collect()
    }

    /// Picks the next scenario (lowest index on ties) and tightens the
    /// matrix against it. Returns `None` once every scenario is selected.
    pub fn select_next(&mut self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (w, d) in self.candidate_distances() {
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((w, d));
            }
        }
        let (pick, d) = best?;
        self.selected.push(pick);
        self.is_selected[pick] = true;
        let n = self.current.len();
        for w in 0..n {
            let through_pick = self.current.data[w * n + pick];
            for cell in &mut self.current.data[w * n..(w + 1) * n] {
                if through_pick < *cell {
                    *cell = through_pick;
                }
            }
        }
        Some((pick, d))
    }

    /// Finishes the reduction: assigns each deleted scenario to the nearest
    /// selected one by original distance and sums probabilities.
    pub fn finish(self) -> ReductionResult {
        let n = self.original.len();
        let mut by_index: Vec<usize> = self.selected.clone();
        by_index.sort_unstable();
        let mut mass: BTreeMap<usize, f64> =
            self.selected.iter().map(|&s| (s, self.probabilities[s])).collect();
        let mut assignment = BTreeMap::new();
        let mut deleted = Vec::new();
        for w in (0..n).filter(|&w| !self.is_selected[w]) {
            deleted.push(w);
            let mut nearest = by_index[0];
            for &s in &by_index[1..] {
                if self.original.get(s, w) < self.original.get(nearest, w) {
                    nearest = s;
                }
            }
            assignment.insert(w, nearest);
            *mass.get_mut(&nearest).expect("selected") += self.probabilities[w];
        }
        let probabilities = self.selected.iter().map(|s| mass[s]).collect();
        ReductionResult { selected: self.selected, deleted, probabilities, assignment }
    }
}

fn check_target(n: usize, target: usize) -> Result<()> {
    if target == 0 || target > n {
        return Err(Error::domain(format!("reduction target {target} outside 1..={n}")));
    }
    Ok(())
}

fn identity(set: &ScenarioSet) -> ReductionResult {
    ReductionResult {
        selected: (0..set.len()).collect(),
        deleted: Vec::new(),
        probabilities: set.probabilities(),
        assignment: BTreeMap::new(),
    }
}

pub fn fast_forward(set: &ScenarioSet, target: usize) -> Result<ReductionResult> {
    fast_forward_with(set, target, Metric::L1)
}

pub fn fast_forward_with(set: &ScenarioSet, target: usize, metric: Metric) -> Result<ReductionResult> {
    check_target(set.len(), target)?;
    if target == set.len() {
        return Ok(identity(set));
    }
    let mut ff = FastForward::new(set, metric)?;
    while ff.selected().len() < target {
        ff.select_next();
    }
    Ok(ff.finish())
}

/// Keeps the selected scenarios (in selection order) with their
/// redistributed probabilities.
pub fn redistribute(set: &ScenarioSet, result: &ReductionResult) -> Result<ScenarioSet> {
    let n = set.len();
    let mut seen = vec![0u8; n];
    for &i in result.selected.iter().chain(&result.deleted) {
        if i >= n {
            return Err(Error::consistency(format!("index {i} out of range for {n} scenarios")));
        }
        seen[i] += 1;
    }
    if seen.iter().any(|&c| c != 1) {
        return Err(Error::consistency("selected and deleted indices must partition the set"));
    }
    if result.probabilities.len() != result.selected.len()
        || result.assignment.len() != result.deleted.len()
        || result.deleted.iter().any(|d| {
            result.assignment.get(d).is_none_or(|s| !result.selected.contains(s))
        })
    {
        return Err(Error::consistency("reduction result is not internally consistent"));
    }
    let sc = set.scenarios();
    let mut mass: BTreeMap<usize, f64> =
        result.selected.iter().map(|&s| (s, sc[s].probability)).collect();
    for (&d, &s) in &result.assignment {
        *mass.get_mut(&s).expect("checked above") += sc[d].probability;
    }
    let kept = result
        .selected
        .iter()
        // summing every scenario into one can land a few ulps above 1
        .map(|&s| Scenario { probability: mass[&s].min(1.0), ..sc[s].clone() })
        .collect();
    ScenarioSet::new(kept)
}

/// Runs selection and redistribution in one go.
pub fn reduce(set: &ScenarioSet, target: usize) -> Result<(ScenarioSet, ReductionResult)> {
    let result = fast_forward(set, target)?;
    let reduced = redistribute(set, &result)?;
    Ok((reduced, result))
}
