//! Synthetic SMA specimen: thermal state, latent fatigue and blocked force.
//!
//! Force is `f0 * phase_fraction(T) * d`, where the logistic phase fraction
//! stands in for the martensite to austenite transformation and `d` is a
//! degradation fraction that relaxes, never recovers, toward a
//! temperature-dependent floor whenever the wire sits above `t_dmg`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermal::{step_temperature, DiscreteCoeffs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FatigueParams {
    /// Fresh-wire peak blocked force, N.
    pub f0: f64,
    /// Logistic activation center, degC.
    pub t_act: f64,
    /// Logistic width, degC.
    pub w: f64,
    /// Damage onset temperature, degC.
    pub t_dmg: f64,
    /// Plateau knee temperature, degC.
    pub t_knee: f64,
    /// Degradation floor between `t_dmg` and `t_knee`.
    pub d_plateau: f64,
    /// Floor slope above the knee, 1/degC.
    pub kappa: f64,
    /// Absolute floor.
    pub d_min: f64,
    /// Relaxation rate, 1/(degC s).
    pub eta: f64,
}

impl FatigueParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f0 > 0.0
            && self.w > 0.0
            && self.t_dmg < self.t_knee
            && self.d_min > 0.0
            && self.d_min <= self.d_plateau
            && self.d_plateau <= 1.0
            && self.kappa >= 0.0
            && self.eta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid fatigue parameters: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Temperature measurement noise std, degC.
    pub sigma_t: f64,
    /// Force measurement noise std, N.
    pub sigma_f: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn noiseless(seed: u64) -> Self {
        NoiseParams { sigma_t: 0.0, sigma_f: 0.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_t >= 0.0 && self.sigma_f >= 0.0 && self.sigma_t.is_finite() && self.sigma_f.is_finite() {
            Ok(())
        } else {
            Err(Error::config(format!("noise std must be finite and >= 0: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// True wire temperature, degC.
    pub temp: f64,
    /// Degradation fraction in `[d_min, 1]`.
    pub d: f64,
    /// Simulated time, s.
    pub elapsed: f64,
}

impl PlantState {
    /// A freshly fabricated wire at `temp`.
    pub fn fresh(temp: f64) -> Self {
        PlantState { temp, d: 1.0, elapsed: 0.0 }
    }
}

pub fn phase_fraction(t: f64, fp: &FatigueParams) -> f64 {
    1.0 / (1.0 + (-(t - fp.t_act) / fp.w).exp())
}

pub fn degradation_floor(t: f64, fp: &FatigueParams) -> f64 {
    if t <= fp.t_dmg {
        1.0
    } else if t <= fp.t_knee {
        fp.d_plateau
    } else {
        (fp.d_plateau - fp.kappa * (t - fp.t_knee)).max(fp.d_min)
    }
}

/// Relax `d` toward the floor at the current temperature over `dt`.
pub fn degrade_step(s: &PlantState, fp: &FatigueParams, dt: f64) -> PlantState {
    let floor = degradation_floor(s.temp, fp);
    let drive = (s.temp - fp.t_dmg).max(0.0);
    let gap = (s.d - floor).max(0.0);
    let mut d = s.d - dt * fp.eta * drive * gap;
    // an Euler step may overshoot the floor when dt*eta*drive > 1
    d = d.max(floor.min(s.d)).max(fp.d_min).min(s.d);
    PlantState { d, ..*s }
}

pub fn blocked_force(s: &PlantState, fp: &FatigueParams) -> f64 {
    fp.f0 * phase_fraction(s.temp, fp) * s.d
}

/// Seeded Gaussian measurement channel for temperature and force.
#[derive(Debug, Clone)]
pub struct MeasurementNoise {
    rng: ChaCha8Rng,
    temp: Normal<f64>,
    force: Normal<f64>,
}

impl MeasurementNoise {
    pub fn new(np: &NoiseParams) -> Result<Self> {
        np.validate()?;
        let normal = |s: f64| Normal::new(0.0, s).map_err(|e| Error::config(e.to_string()));
        Ok(MeasurementNoise {
            rng: ChaCha8Rng::seed_from_u64(np.seed),
            temp: normal(np.sigma_t)?,
            force: normal(np.sigma_f)?,
        })
    }

    /// Measured (temperature, force) for a true state. Draw order is fixed:
    /// temperature first, then force.
    pub fn measure(&mut self, s: &PlantState, fp: &FatigueParams) -> (f64, f64) {
        let temp = s.temp + self.temp.sample(&mut self.rng);
        let force = blocked_force(s, fp) + self.force.sample(&mut self.rng);
        (temp, force)
    }
}

/// Advance the true state one control period and read the new measurements.
///
/// Damage accrues over the period at the temperature held at its start;
/// the thermal map then moves the temperature.
pub fn plant_step(
    s: &PlantState,
    u: f64,
    coeffs: &DiscreteCoeffs,
    fp: &FatigueParams,
    dt: f64,
    noise: &mut MeasurementNoise,
) -> (PlantState, f64, f64) {
    let degraded = degrade_step(s, fp, dt);
    let next = PlantState {
        temp: step_temperature(coeffs, s.temp, u),
        d: degraded.d,
        elapsed: s.elapsed + dt,
    };
    let (t_meas, f_meas) = noise.measure(&next, fp);
    (next, t_meas, f_meas)
}
