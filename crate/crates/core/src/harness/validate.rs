//! A/B degradation check: fatigue two fresh wires at a low and a high
//! limit, re-cycle both at a common temperature, then compare their
//! blocked force at that temperature.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::{Profile, TrialConfig};
use crate::harness::trial::run_from;
use crate::plant::{blocked_force, PlantState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbConfig {
    pub t_low: f64,
    pub t_high: f64,
    /// Total cycles per specimen, re-cycling included.
    pub cycles: u32,
    /// Cycles at the common temperature at the end of the run.
    pub recycle_cycles: u32,
    pub t_recycle: f64,
}

impl Default for AbConfig {
    fn default() -> Self {
        AbConfig { t_low: 140.0, t_high: 230.0, cycles: 150, recycle_cycles: 50, t_recycle: 140.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbReport {
    pub t_low: f64,
    pub t_high: f64,
    pub fatigue_cycles: u32,
    pub recycle_cycles: u32,
    pub t_match: f64,
    pub d_low: f64,
    pub d_high: f64,
    pub force_low: f64,
    pub force_high: f64,
    /// `force_high / force_low`.
    pub ratio: f64,
}

fn specimen(base: &TrialConfig, t_fatigue: f64, fatigue: u32, ab: &AbConfig, recycle: u32) -> Result<PlantState> {
    let mut state = PlantState::fresh(base.thermal.t_amb);
    for (t_set, cycles) in [(t_fatigue, fatigue), (ab.t_recycle, recycle)] {
        if cycles == 0 {
            continue;
        }
        let mut cfg = base.with_cell(Profile::C1, t_set, base.noise.seed);
        cfg.v_max = cycles;
        let (_, end, err) = run_from(&cfg, state);
        if let Some(e) = err {
            return Err(e);
        }
        state = end;
    }
    Ok(state)
}

pub fn validate_ab(base: &TrialConfig, ab: &AbConfig) -> Result<AbReport> {
    for t in [ab.t_low, ab.t_high, ab.t_recycle] {
        if !(t > base.thermal.t_amb + base.generator.c1.tol) {
            return Err(Error::config(format!("temperature {t} C is below the C1 band floor")));
        }
    }
    let recycle = ab.recycle_cycles.min(ab.cycles);
    let fatigue = ab.cycles - recycle;
    let low = specimen(base, ab.t_low, fatigue, ab, recycle)?;
    let high = specimen(base, ab.t_high, fatigue, ab, recycle)?;
    let fp = &base.fatigue;
    let at = |d: f64| blocked_force(&PlantState { temp: ab.t_recycle, d, elapsed: 0.0 }, fp);
    let (force_low, force_high) = (at(low.d), at(high.d));
    Ok(AbReport {
        t_low: ab.t_low,
        t_high: ab.t_high,
        fatigue_cycles: fatigue,
        recycle_cycles: recycle,
        t_match: ab.t_recycle,
        d_low: low.d,
        d_high: high.d,
        force_low,
        force_high,
        ratio: force_high / force_low,
    })
}
