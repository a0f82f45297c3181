//! Maps a particle position onto a [`Schedule`].
//!
//! Each hour occupies one contiguous block:
//!
//! | slot                         | count      | range    |
//! |------------------------------|------------|----------|
//! | generator commitment logit   | `n_gen`    | `[0, 1]` |
//! | generator power level        | `n_gen`    | `[-1, 1]`|
//! | storage charge/idle/discharge| `3·n_ess`  | `[0, 1]` |
//! | storage power level          | `n_ess`    | `[-1, 1]`|
//! | sell-flag logit              | 1          | `[0, 1]` |
//! | grid power level             | 1          | `[-1, 1]`|
//!
//! Logits above 0.5 switch a flag on. Levels map affinely from `[-1, 1]`
//! onto the active box of the quantity.

use crate::domain::{EssState, MicrogridSpec, Schedule};
use crate::error::{Error, Result};

pub const LOGIT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoding {
    pub n_gen: usize,
    pub n_ess: usize,
    pub horizon: usize,
}

impl Encoding {
    pub fn for_spec(spec: &MicrogridSpec) -> Self {
        Self { n_gen: spec.generators.len(), n_ess: spec.storages.len(), horizon: spec.horizon }
    }

    pub fn per_hour(&self) -> usize {
        2 * self.n_gen + 4 * self.n_ess + 2
    }

    pub fn len(&self) -> usize {
        self.per_hour() * self.horizon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn base(&self, hour: usize) -> usize {
        hour * self.per_hour()
    }

    pub fn commitment(&self, hour: usize, gen: usize) -> usize {
        self.base(hour) + gen
    }

    pub fn gen_level(&self, hour: usize, gen: usize) -> usize {
        self.base(hour) + self.n_gen + gen
    }

    /// `mode`: 0 charge, 1 idle, 2 discharge.
    pub fn ess_logit(&self, hour: usize, ess: usize, mode: usize) -> usize {
        self.base(hour) + 2 * self.n_gen + 3 * ess + mode
    }

    pub fn ess_level(&self, hour: usize, ess: usize) -> usize {
        self.base(hour) + 2 * self.n_gen + 3 * self.n_ess + ess
    }

    pub fn sell(&self, hour: usize) -> usize {
        self.base(hour) + 2 * self.n_gen + 4 * self.n_ess
    }

    pub fn grid_level(&self, hour: usize) -> usize {
        self.sell(hour) + 1
    }

    /// Lower and upper bound of every coordinate.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = Vec::with_capacity(self.len());
        for _ in 0..self.horizon {
            b.extend(std::iter::repeat_n((0.0, 1.0), self.n_gen));
            b.extend(std::iter::repeat_n((-1.0, 1.0), self.n_gen));
            b.extend(std::iter::repeat_n((0.0, 1.0), 3 * self.n_ess));
            b.extend(std::iter::repeat_n((-1.0, 1.0), self.n_ess));
            b.push((0.0, 1.0));
            b.push((-1.0, 1.0));
        }
        b
    }
}

fn level(x: f64, lo: f64, hi: f64) -> f64 {
    let u = ((x.clamp(-1.0, 1.0) + 1.0) / 2.0).clamp(0.0, 1.0);
    lo + u * (hi - lo)
}

/// Forward sweep that keeps a commitment pattern unchanged until a switch
/// would cut an on-run shorter than `min_up` or an off-run shorter than
/// `min_down`; such switches are postponed. History before the first hour
/// is off for long enough.
pub fn repair_min_up_down(raw: &[bool], min_up: u32, min_down: u32) -> Vec<bool> {
    let mut out = Vec::with_capacity(raw.len());
    let mut on = false;
    let mut run = u32::MAX;
    for &want in raw {
        let next = if on && run < min_up {
            true
        } else if !on && run < min_down {
            false
        } else {
            want
        };
        if next == on {
            run = run.saturating_add(1);
        } else {
            on = next;
            run = 1;
        }
        out.push(next);
    }
    out
}

/// Storage mode from its three logits. Ties prefer idle, then charge.
fn storage_mode(charge: f64, idle: f64, discharge: f64) -> EssState {
    if idle >= charge && idle >= discharge {
        EssState::IDLE
    } else if charge >= discharge {
        EssState::CHARGE
    } else {
        EssState::DISCHARGE
    }
}

pub fn decode(position: &[f64], spec: &MicrogridSpec) -> Result<Schedule> {
    let enc = Encoding::for_spec(spec);
    if position.len() != enc.len() {
        return Err(Error::Encoding { expected: enc.len(), actual: position.len() });
    }
    let mut s = Schedule::idle(spec);
    for (i, g) in spec.generators.iter().enumerate() {
        let raw: Vec<bool> = (0..enc.horizon)
            .map(|h| position[enc.commitment(h, i)] > LOGIT_THRESHOLD)
            .collect();
        s.gen_on[i] = repair_min_up_down(&raw, g.min_up_time, g.min_down_time);
        for h in 0..enc.horizon {
            if s.gen_on[i][h] {
                s.gen_power[i][h] = level(position[enc.gen_level(h, i)], g.p_min, g.p_max);
            }
        }
    }
    for (e, unit) in spec.storages.iter().enumerate() {
        for h in 0..enc.horizon {
            let state = storage_mode(
                position[enc.ess_logit(h, e, 0)],
                position[enc.ess_logit(h, e, 1)],
                position[enc.ess_logit(h, e, 2)],
            );
            let x = position[enc.ess_level(h, e)];
            s.ess_state[e][h] = state;
            s.ess_power[e][h] = if state.charging {
                level(x, unit.charge_min, unit.charge_max)
            } else if state.discharging {
                level(x, unit.discharge_min, unit.discharge_max)
            } else {
                0.0
            };
        }
    }
    for h in 0..enc.horizon {
        s.sell[h] = position[enc.sell(h)] > LOGIT_THRESHOLD;
        s.grid_power[h] = level(position[enc.grid_level(h)], spec.grid_min, spec.grid_max).max(0.0);
    }
    s.refresh_soc(spec);
    Ok(s)
}
