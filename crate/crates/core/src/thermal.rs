//! First-order electrothermal model of an SMA wire.
//!
//! Continuous form: `dT/dt = alpha1 (T - T_amb) + alpha2 u`, with `u` the
//! PWM duty. The forward-Euler discretization at the control period `dt`
//! gives the affine map `T' = a1 T + a2 u + a3` used by both the plant and
//! the supervisor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous-time thermal coefficients plus the control period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Cooling rate, 1/s. Negative.
    pub alpha1: f64,
    /// Heating gain, degC/s per unit duty. Positive.
    pub alpha2: f64,
    /// Ambient temperature constant, degC.
    pub t_amb: f64,
    /// Control period, s.
    pub dt: f64,
}

impl ThermalParams {
    pub fn new(alpha1: f64, alpha2: f64, t_amb: f64, dt: f64) -> Result<Self> {
        let p = ThermalParams { alpha1, alpha2, t_amb, dt };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 < 0.0) {
            return Err(Error::config(format!("alpha1 must be negative, got {}", self.alpha1)));
        }
        if !(self.alpha2 > 0.0) {
            return Err(Error::config(format!("alpha2 must be positive, got {}", self.alpha2)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_amb.is_finite() {
            return Err(Error::config("t_amb must be finite"));
        }
        if self.alpha1.abs() * self.dt >= 1.0 {
            return Err(Error::config(format!(
                "|alpha1|*dt = {} must be < 1 for a stable discretization",
                self.alpha1.abs() * self.dt
            )));
        }
        Ok(())
    }

    /// Equilibrium temperature under a constant duty.
    pub fn steady_temperature(&self, duty: f64) -> f64 {
        self.t_amb - self.alpha2 * duty / self.alpha1
    }

    /// Duty that holds the wire at `temp` indefinitely.
    pub fn steady_duty(&self, temp: f64) -> f64 {
        -self.alpha1 * (temp - self.t_amb) / self.alpha2
    }
}

/// Coefficients of the discrete affine map `T' = a1 T + a2 u + a3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl DiscreteCoeffs {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        let c = DiscreteCoeffs { a1, a2, a3 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a1 > 0.0 && self.a1 < 1.0) {
            return Err(Error::config(format!("a1 must lie in (0, 1), got {}", self.a1)));
        }
        if !(self.a2 > 0.0) {
            return Err(Error::config(format!("a2 must be positive, got {}", self.a2)));
        }
        if !self.a3.is_finite() {
            return Err(Error::config("a3 must be finite"));
        }
        Ok(())
    }

    /// Zero-input fixed point, i.e. the ambient temperature.
    pub fn ambient(&self) -> f64 {
        self.a3 / (1.0 - self.a1)
    }

    pub fn step(&self, temp: f64, duty: f64) -> f64 {
        step_temperature(self, temp, duty)
    }
}

pub fn discretize(p: &ThermalParams) -> Result<DiscreteCoeffs> {
    p.validate()?;
    Ok(DiscreteCoeffs {
        a1: 1.0 + p.alpha1 * p.dt,
        a2: p.alpha2 * p.dt,
        a3: -p.alpha1 * p.t_amb * p.dt,
    })
}

/// One control period of the discrete model. Temperatures are unclamped.
pub fn step_temperature(c: &DiscreteCoeffs, t_k: f64, u_k: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&u_k), "duty {u_k} outside [0, 1]");
    c.a1 * t_k + c.a2 * u_k + c.a3
}

/// Closed-form continuous response to a constant duty, starting from `t0`.
pub fn analytic_response(p: &ThermalParams, t0: f64, u_const: f64, t: f64) -> f64 {
    let t_eq = p.steady_temperature(u_const);
    t_eq + (t0 - t_eq) * (p.alpha1 * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> ThermalParams {
        ThermalParams::new(-0.079, 29.22, 35.16, 0.2).unwrap()
    }

    #[test]
    fn zero_ambient_discretization() {
        let c = discretize(&ThermalParams::new(-0.5, 1.0, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!((c.a1, c.a2, c.a3), (0.5, 1.0, 0.0));
    }

    #[test]
    fn identified_coefficients() {
        let c = discretize(&reference()).unwrap();
        assert_relative_eq!(c.a1, 0.9842, epsilon = 1e-12);
        assert_relative_eq!(c.a2, 5.844, epsilon = 1e-12);
        assert_relative_eq!(c.a3, 0.079 * 35.16 * 0.2, epsilon = 1e-12);
        assert_relative_eq!(c.a3, 0.55553, epsilon = 1e-5);
        assert_relative_eq!(c.ambient(), 35.16, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ThermalParams::new(0.1, 1.0, 20.0, 0.2).is_err());
        assert!(ThermalParams::new(-0.1, 0.0, 20.0, 0.2).is_err());
        assert!(ThermalParams::new(-0.1, 1.0, 20.0, 0.0).is_err());
        assert!(ThermalParams::new(-6.0, 1.0, 20.0, 0.2).is_err());
        let bad = ThermalParams { alpha1: 0.2, alpha2: 1.0, t_amb: 0.0, dt: 0.1 };
        assert!(discretize(&bad).is_err());
    }

    #[test]
    fn step_examples() {
        let c = discretize(&reference()).unwrap();
        assert_relative_eq!(step_temperature(&c, 35.16, 0.0), 35.16, epsilon = 1e-9);
        assert_relative_eq!(step_temperature(&c, 35.16, 0.5), 38.082, epsilon = 1e-9);
        // duty that holds 140 C: -alpha1 (T - T_amb) / alpha2
        let hold = reference().steady_duty(140.0);
        assert_relative_eq!(hold, 0.28345, epsilon = 1e-4);
        assert_relative_eq!(step_temperature(&c, 140.0, hold), 140.0, epsilon = 1e-9);
        assert_relative_eq!(step_temperature(&c, 140.0, 0.28345), 140.0, epsilon = 1e-3);
    }

    #[test]
    fn analytic_examples() {
        let p = reference();
        for t in [0.0, 3.0, 100.0] {
            assert_relative_eq!(analytic_response(&p, 35.16, 0.0, t), 35.16, epsilon = 1e-9);
        }
        // T_amb - alpha2 u / alpha1
        let t_eq = 35.16 + 29.22 * 0.5 / 0.079;
        assert_relative_eq!(analytic_response(&p, 35.16, 0.5, 1e6), t_eq, epsilon = 1e-9);
        assert_relative_eq!(t_eq, 220.0967, epsilon = 1e-4);
        let at = analytic_response(&p, 35.16, 0.5, 9.38);
        let oracle = t_eq - (t_eq - 35.16) * (-0.079f64 * 9.38).exp();
        assert_relative_eq!(at, oracle, epsilon = 1e-9);
        assert!((at - 132.0).abs() < 0.1, "{at}");
    }

    #[test]
    fn discrete_tracks_continuous() {
        let p = reference();
        let c = discretize(&p).unwrap();
        // forward Euler lags the exponential by at most ~0.3% of the total rise
        for u in [0.0, 0.25, 0.3, 0.4, 0.5, 1.0] {
            let rise = p.steady_temperature(u) - 35.16;
            let bound = if u <= 0.4 { 0.5 } else { 0.003 * rise };
            let mut temp = 35.16;
            let steps = (120.0 / p.dt) as usize;
            let mut worst: f64 = 0.0;
            for k in 1..=steps {
                temp = step_temperature(&c, temp, u);
                let exact = analytic_response(&p, 35.16, u, k as f64 * p.dt);
                worst = worst.max((temp - exact).abs());
            }
            assert!(worst < bound, "u={u}: worst deviation {worst}");
        }
    }

    #[test]
    fn refining_dt_converges() {
        // error should shrink roughly linearly with dt
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&dt| {
                let p = ThermalParams { dt, ..reference() };
                let c = discretize(&p).unwrap();
                let n = (20.0 / dt).round() as usize;
                let mut temp = 35.16;
                for _ in 0..n {
                    temp = step_temperature(&c, temp, 0.5);
                }
                (temp - analytic_response(&p, 35.16, 0.5, 20.0)).abs()
            })
            .collect();
        assert!(errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1], "{errs:?}");
    }

    proptest! {
        #[test]
        fn fixed_point_is_ambient(alpha1 in -2.0f64..-0.01, alpha2 in 0.1f64..100.0,
                                  t_amb in -20.0f64..60.0, dt in 0.01f64..0.4) {
            let c = discretize(&ThermalParams { alpha1, alpha2, t_amb, dt }).unwrap();
            prop_assert!((c.ambient() - t_amb).abs() < 1e-9 * (1.0 + t_amb.abs()));
            prop_assert!((step_temperature(&c, t_amb, 0.0) - t_amb).abs() < 1e-9);
        }

        #[test]
        fn step_is_monotone(t in -50.0f64..400.0, dtemp in 1e-6f64..10.0,
                            u in 0.0f64..0.99, du in 1e-6f64..0.01) {
            let c = discretize(&reference()).unwrap();
            prop_assert!(step_temperature(&c, t + dtemp, u) > step_temperature(&c, t, u));
            prop_assert!(step_temperature(&c, t, u + du) > step_temperature(&c, t, u));
        }
    }
}
