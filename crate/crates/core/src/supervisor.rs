//! One-step predictive supervisory saturation of the PWM duty.
//!
//! The supervisor leaves the nominal duty alone unless applying it would,
//! according to its own discrete model, carry the wire past the limit
//! `t_set`. The one-step bound is discounted by `gamma` and the setpoint is
//! shifted to `t_set_adj` so the discounted closed loop still settles at
//! `t_set`:
//!
//! ```text
//! T' = a1 (1 - gamma) T + gamma t_set_adj + (1 - gamma) a3,  fixed point = t_set
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::thermal::DiscreteCoeffs;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupervisorConfig {
    t_set: f64,
    gamma: f64,
    coeffs: DiscreteCoeffs,
    t_set_adj: f64,
}

impl SupervisorConfig {
    pub fn new(t_set: f64, gamma: f64, coeffs: DiscreteCoeffs) -> Result<Self> {
        coeffs.validate()?;
        if !(t_set > coeffs.ambient()) {
            return Err(Error::config(format!(
                "limit {t_set} C must exceed the model ambient {:.3} C",
                coeffs.ambient()
            )));
        }
        let t_set_adj = adjusted_setpoint(t_set, gamma, &coeffs)?;
        Ok(SupervisorConfig { t_set, gamma, coeffs, t_set_adj })
    }

    pub fn t_set(&self) -> f64 {
        self.t_set
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn coeffs(&self) -> &DiscreteCoeffs {
        &self.coeffs
    }

    pub fn t_set_adj(&self) -> f64 {
        self.t_set_adj
    }

    pub fn max_input(&self, t_k: f64) -> f64 {
        max_input(t_k, self)
    }

    pub fn saturate(&self, u_nom: f64, t_k: f64) -> f64 {
        saturate(u_nom, t_k, self)
    }
}

/// Setpoint correction that cancels the equilibrium shift caused by `gamma`.
pub fn adjusted_setpoint(t_set: f64, gamma: f64, c: &DiscreteCoeffs) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let k = (1.0 - gamma) / gamma;
    Ok((1.0 / gamma - c.a1 * k) * t_set - c.a3 * k)
}

/// Undiscounted one-step maximal duty. Negative when the wire is already
/// above the (adjusted) limit, above 1 when far below it.
pub fn max_input(t_k: f64, cfg: &SupervisorConfig) -> f64 {
    let c = &cfg.coeffs;
    (cfg.t_set_adj - c.a1 * t_k - c.a3) / c.a2
}

/// Applied duty: `min(u_nom, gamma u*)`, clamped to the PWM range.
pub fn saturate(u_nom: f64, t_k: f64, cfg: &SupervisorConfig) -> f64 {
    u_nom.min(cfg.gamma * max_input(t_k, cfg)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::{discretize, step_temperature, ThermalParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn coeffs() -> DiscreteCoeffs {
        discretize(&ThermalParams::new(-0.079, 29.22, 35.16, 0.2).unwrap()).unwrap()
    }

    #[test]
    fn adjusted_setpoint_examples() {
        let c = coeffs();
        assert_relative_eq!(adjusted_setpoint(140.0, 1.0, &c).unwrap(), 140.0, epsilon = 1e-12);
        assert_relative_eq!(adjusted_setpoint(140.0, 0.15, &c).unwrap(), 149.38, epsilon = 0.01);
        assert!(adjusted_setpoint(140.0, 0.0, &c).is_err());
        assert!(adjusted_setpoint(140.0, -0.3, &c).is_err());
        assert!(adjusted_setpoint(140.0, 1.2, &c).is_err());
    }

    #[test]
    fn max_input_examples() {
        let c = coeffs();
        let cfg = SupervisorConfig::new(140.0, 0.15, c).unwrap();
        let drift_to_setpoint = (cfg.t_set_adj() - c.a3) / c.a1;
        assert!(cfg.max_input(drift_to_setpoint).abs() < 1e-12);
        // independent evaluation: T' from the closed form, then (T' - a1 T - a3) / a2
        let g = 0.15;
        let t_adj = (1.0 / g - c.a1 * (1.0 - g) / g) * 140.0 - c.a3 * (1.0 - g) / g;
        let oracle = (t_adj - c.a1 * 140.0 - c.a3) / c.a2;
        assert_relative_eq!(cfg.max_input(140.0), oracle, epsilon = 1e-12);
        assert_relative_eq!(oracle, 1.88966, epsilon = 1e-5);
        // rounding T' to 149.38 first gives the commonly quoted 1.8885
        assert_relative_eq!((149.38 - c.a1 * 140.0 - c.a3) / c.a2, 1.8885, epsilon = 1e-4);
        let plain = SupervisorConfig::new(140.0, 1.0, c).unwrap();
        assert_relative_eq!(plain.max_input(140.0), 0.28345, epsilon = 1e-4);
    }

    #[test]
    fn saturate_examples() {
        let cfg = SupervisorConfig::new(140.0, 0.15, coeffs()).unwrap();
        assert_eq!(cfg.saturate(0.0, 140.0), 0.0);
        assert_relative_eq!(cfg.saturate(0.5, 140.0), 0.2833, epsilon = 2e-4);
        assert_eq!(cfg.saturate(0.5, 160.0), 0.0);
        // far below the limit the nominal passes through
        assert_eq!(cfg.saturate(0.5, 40.0), 0.5);
    }

    #[test]
    fn rejects_limit_below_ambient() {
        assert!(SupervisorConfig::new(30.0, 0.15, coeffs()).is_err());
    }

    #[test]
    fn settles_at_limit_with_full_nominal() {
        let c = coeffs();
        let settle_time = |gamma: f64| {
            let cfg = SupervisorConfig::new(140.0, gamma, c).unwrap();
            let mut t = 35.16;
            let mut last_far = 0;
            for k in 0..2000 {
                t = step_temperature(&c, t, cfg.saturate(1.0, t));
                assert!(t <= 140.0 + 1e-9);
                if (t - 140.0).abs() >= 0.1 {
                    last_far = k;
                }
            }
            assert!((t - 140.0).abs() < 0.1);
            last_far
        };
        let slow = settle_time(0.15);
        let fast = settle_time(0.6);
        let fastest = settle_time(1.0);
        assert!(fastest <= fast && fast < slow, "{fastest} {fast} {slow}");
    }

    fn arb_coeffs() -> impl Strategy<Value = DiscreteCoeffs> {
        (-2.0f64..-0.01, 0.5f64..80.0, 0.0f64..50.0, 0.01f64..0.4).prop_map(|(a1, a2, ta, dt)| {
            discretize(&ThermalParams { alpha1: a1, alpha2: a2, t_amb: ta, dt }).unwrap()
        })
    }

    proptest! {
        #[test]
        fn equilibrium_input_preserved(c in arb_coeffs(), gamma in 0.01f64..=1.0, over in 1.0f64..300.0) {
            let t_set = c.ambient() + over;
            let cfg = SupervisorConfig::new(t_set, gamma, c).unwrap();
            let discounted = gamma * cfg.max_input(t_set);
            let steady = (t_set - c.a1 * t_set - c.a3) / c.a2;
            prop_assert!((discounted - steady).abs() <= 1e-9 * (1.0 + steady.abs()));
            // closed-loop fixed point
            let fixed = (gamma * cfg.t_set_adj() + (1.0 - gamma) * c.a3) / (1.0 - c.a1 * (1.0 - gamma));
            prop_assert!((fixed - t_set).abs() <= 1e-9 * t_set.abs().max(1.0));
        }

        #[test]
        fn containment_any_nominal(nominal in proptest::collection::vec(0.0f64..=1.0, 1..400),
                                   t0 in 20.0f64..140.0, gamma in 0.05f64..=1.0) {
            let c = coeffs();
            let cfg = SupervisorConfig::new(140.0, gamma, c).unwrap();
            let mut t = t0;
            for u in nominal {
                let applied = cfg.saturate(u, t);
                prop_assert!((0.0..=1.0).contains(&applied) && applied <= u);
                t = step_temperature(&c, t, applied);
                prop_assert!(t <= 140.0 + 1e-9);
            }
        }

        #[test]
        fn output_in_unit_interval(u in 0.0f64..=1.0, t in -100.0f64..500.0) {
            let cfg = SupervisorConfig::new(140.0, 0.15, coeffs()).unwrap();
            let out = cfg.saturate(u, t);
            prop_assert!((0.0..=1.0).contains(&out));
        }
    }
}
