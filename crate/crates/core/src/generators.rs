//! Nominal duty profiles for fatigue cycling.
//!
//! `C1` heats until the wire is within `tol` of the limit, lets the
//! supervisor hold it there for `hold_s`, then cools until the temperature
//! drops below `t_cool`. `C2` ignores temperature and alternates fixed
//! heating and cooling periods. Both only ever emit `0` or their
//! configured duty; the supervisor does the rest.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack for float accumulation of elapsed time against period boundaries.
const TIME_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Heating,
    Holding,
    Cooling,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Heating => "heating",
            Phase::Holding => "holding",
            Phase::Cooling => "cooling",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "heating" => Ok(Phase::Heating),
            "holding" => Ok(Phase::Holding),
            "cooling" => Ok(Phase::Cooling),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

/// Things a generator reports that are not errors but belong in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorNote {
    /// C1 gave up heating toward a band it never reached.
    HeatTimeout { cycle: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOutput {
    pub u_nom: f64,
    pub done: bool,
    pub note: Option<GeneratorNote>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C1Config {
    pub t_set: f64,
    pub tol: f64,
    pub hold_s: f64,
    pub t_cool: f64,
    pub duty: f64,
    pub v_max: u32,
    pub cool_timeout_s: f64,
    pub heat_timeout_s: f64,
}

impl C1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config("C1 tol must be positive"));
        }
        if !(self.hold_s > 0.0) {
            return Err(Error::config("C1 hold_s must be positive"));
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(Error::config(format!("C1 duty must lie in (0, 1], got {}", self.duty)));
        }
        if !(self.t_cool < self.t_set - self.tol) {
            return Err(Error::config(format!(
                "C1 t_cool {} must be below t_set - tol = {}",
                self.t_cool,
                self.t_set - self.tol
            )));
        }
        if !(self.cool_timeout_s > 0.0 && self.heat_timeout_s > 0.0) {
            return Err(Error::config("C1 timeouts must be positive"));
        }
        Ok(())
    }

    fn in_band(&self, t_meas: f64) -> bool {
        (t_meas - self.t_set).abs() < self.tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C1State {
    pub phase: Phase,
    pub hold_elapsed: f64,
    /// Time spent in the current phase, used for the timeouts.
    pub phase_elapsed: f64,
    pub cycle: u32,
}

impl Default for C1State {
    fn default() -> Self {
        C1State { phase: Phase::Heating, hold_elapsed: 0.0, phase_elapsed: 0.0, cycle: 1 }
    }
}

/// Advance the temperature-setpoint generator by one period.
///
/// The returned state's phase is the one the emitted duty belongs to.
pub fn c1_step(st: &C1State, cfg: &C1Config, t_meas: f64, dt: f64) -> Result<(GeneratorOutput, C1State)> {
    let mut next = *st;
    let mut note = None;
    if next.cycle > cfg.v_max {
        return Ok((GeneratorOutput { u_nom: 0.0, done: true, note }, next));
    }
    match st.phase {
        Phase::Heating => {
            if cfg.in_band(t_meas) {
                next.phase = Phase::Holding;
                next.hold_elapsed = 0.0;
                next.phase_elapsed = 0.0;
            } else if st.phase_elapsed + TIME_EPS >= cfg.heat_timeout_s {
                note = Some(GeneratorNote::HeatTimeout { cycle: st.cycle });
                next.phase = Phase::Cooling;
                next.phase_elapsed = 0.0;
            }
        }
        Phase::Holding => {
            if cfg.in_band(t_meas) && st.hold_elapsed + TIME_EPS >= cfg.hold_s {
                next.phase = Phase::Cooling;
                next.phase_elapsed = 0.0;
            }
        }
        Phase::Cooling => {
            if t_meas < cfg.t_cool {
                // this step still belongs to the finished cycle
                let out = GeneratorOutput { u_nom: 0.0, done: false, note };
                next.cycle += 1;
                next.phase = Phase::Heating;
                next.phase_elapsed = 0.0;
                next.hold_elapsed = 0.0;
                return Ok((out, next));
            }
            if st.phase_elapsed + TIME_EPS >= cfg.cool_timeout_s {
                return Err(Error::Stuck {
                    cycle: st.cycle,
                    message: format!(
                        "cooling exceeded {} s without reaching {} C (last reading {t_meas:.2} C)",
                        cfg.cool_timeout_s, cfg.t_cool
                    ),
                });
            }
        }
    }
    let u_nom = match next.phase {
        Phase::Heating | Phase::Holding => cfg.duty,
        Phase::Cooling => 0.0,
    };
    next.phase_elapsed += dt;
    if next.phase == Phase::Holding {
        next.hold_elapsed += dt;
    }
    Ok((GeneratorOutput { u_nom, done: false, note }, next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2Config {
    pub heat_s: f64,
    pub cool_s: f64,
    pub duty: f64,
    pub v_max: u32,
}

impl C2Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.heat_s > 0.0 && self.cool_s > 0.0) {
            return Err(Error::config("C2 heat_s and cool_s must be positive"));
        }
        if !(self.duty > 0.0 && self.duty <= 1.0) {
            return Err(Error::config(format!("C2 duty must lie in (0, 1], got {}", self.duty)));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.heat_s + self.cool_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2State {
    pub phase: Phase,
    pub phase_elapsed: f64,
    pub cycle: u32,
}

impl Default for C2State {
    fn default() -> Self {
        C2State { phase: Phase::Heating, phase_elapsed: 0.0, cycle: 1 }
    }
}

/// Advance the fixed-time generator by one period.
pub fn c2_step(st: &C2State, cfg: &C2Config, dt: f64) -> (GeneratorOutput, C2State) {
    let mut next = *st;
    if next.phase == Phase::Heating && next.phase_elapsed + TIME_EPS >= cfg.heat_s {
        next.phase = Phase::Cooling;
        next.phase_elapsed = 0.0;
    }
    if next.phase == Phase::Cooling && next.phase_elapsed + TIME_EPS >= cfg.cool_s {
        next.cycle += 1;
        next.phase = Phase::Heating;
        next.phase_elapsed = 0.0;
    }
    if next.cycle > cfg.v_max {
        return (GeneratorOutput { u_nom: 0.0, done: true, note: None }, next);
    }
    let u_nom = if next.phase == Phase::Heating { cfg.duty } else { 0.0 };
    next.phase_elapsed += dt;
    (GeneratorOutput { u_nom, done: false, note: None }, next)
}

/// Either profile behind one interface, as the harness drives it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Generator {
    C1 { cfg: C1Config, state: C1State },
    C2 { cfg: C2Config, state: C2State },
}

impl Generator {
    pub fn c1(cfg: C1Config) -> Self {
        Generator::C1 { cfg, state: C1State::default() }
    }

    pub fn c2(cfg: C2Config) -> Self {
        Generator::C2 { cfg, state: C2State::default() }
    }

    /// Step and return the output together with the (cycle, phase) label
    /// the emitted duty belongs to. The terminal step is labelled as the
    /// cooling tail of the last cycle.
    pub fn step(&mut self, t_meas: f64, dt: f64) -> Result<(GeneratorOutput, u32, Phase)> {
        match self {
            Generator::C1 { cfg, state } => {
                let before = *state;
                let (out, next) = c1_step(&before, cfg, t_meas, dt)?;
                *state = next;
                let label = if out.done {
                    (cfg.v_max, Phase::Cooling)
                } else if next.cycle != before.cycle {
                    (before.cycle, Phase::Cooling)
                } else {
                    (next.cycle, next.phase)
                };
                Ok((out, label.0, label.1))
            }
            Generator::C2 { cfg, state } => {
                let (out, next) = c2_step(state, cfg, dt);
                *state = next;
                if out.done {
                    return Ok((out, cfg.v_max, Phase::Cooling));
                }
                Ok((out, next.cycle, next.phase))
            }
        }
    }
}
