//! The closed loop for one trial: measure, generate, saturate, step, log.

use crate::error::Error;
use crate::generators::GeneratorNote;
use crate::harness::config::{Profile, TrialConfig};
use crate::harness::log::{TrialLog, TrialRow};
use crate::plant::{blocked_force, plant_step, MeasurementNoise, PlantState};

/// A trial that stopped early. The rows logged up to the failure are kept.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct TrialFailure {
    pub error: Error,
    pub partial: Box<TrialLog>,
}

impl From<TrialFailure> for Error {
    fn from(f: TrialFailure) -> Self {
        f.error
    }
}

/// Run `cfg` on a freshly fabricated wire starting at ambient.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialLog, TrialFailure> {
    let start = PlantState::fresh(cfg.thermal.t_amb);
    let (log, _, err) = run_from(cfg, start);
    match err {
        None => Ok(log),
        Some(error) => Err(TrialFailure { error, partial: Box::new(log) }),
    }
}

/// Run `cfg` from an arbitrary plant state; returns the log, the final
/// true state and the error that ended the run, if any.
pub fn run_from(cfg: &TrialConfig, start: PlantState) -> (TrialLog, PlantState, Option<Error>) {
    if let Err(e) = cfg.validate() {
        return (TrialLog::default(), start, Some(e));
    }
    let mut log = TrialLog { metadata: cfg.to_metadata(), rows: Vec::new() };
    let setup = (|| -> crate::Result<_> {
        Ok((cfg.plant_coeffs()?, cfg.supervisor()?, cfg.generator()?, MeasurementNoise::new(&cfg.noise)?))
    })();
    let (coeffs, supervisor, mut generator, mut noise) = match setup {
        Ok(parts) => parts,
        Err(e) => {
            finish(&mut log, cfg, &[], Some(&e));
            return (log, start, Some(e));
        }
    };

    let fp = cfg.fatigue;
    let dt = cfg.dt;
    let mut state = start;
    let (mut t_meas, mut f_meas) = noise.measure(&state, &fp);
    let mut warnings = Vec::new();
    let mut failure = None;
    let mut k: u64 = 0;
    loop {
        let (out, cycle, phase) = match generator.step(t_meas, dt) {
            Ok(step) => step,
            Err(e) => {
                log::warn!("trial stopped: {e}");
                failure = Some(e);
                break;
            }
        };
        if let Some(GeneratorNote::HeatTimeout { cycle }) = out.note {
            let msg = format!("cycle {cycle}: heating timed out before entering the band");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let applied = if out.done { 0.0 } else { supervisor.saturate(out.u_nom, t_meas) };
        log.rows.push(TrialRow {
            time_s: k as f64 * dt,
            cycle,
            phase: Some(phase),
            duty_nominal: out.u_nom,
            duty_applied: applied,
            temp_true: state.temp,
            temp_meas: t_meas,
            force_true: blocked_force(&state, &fp),
            force_meas: f_meas,
        });
        if out.done {
            break;
        }
        let (next, tm, fm) = plant_step(&state, applied, &coeffs, &fp, dt, &mut noise);
        state = next;
        t_meas = tm;
        f_meas = fm;
        k += 1;
    }
    finish(&mut log, cfg, &warnings, failure.as_ref());
    (log, state, failure)
}

fn finish(log: &mut TrialLog, cfg: &TrialConfig, warnings: &[String], failure: Option<&Error>) {
    if cfg.profile() == Profile::C1 {
        log.set_meta("run.c1_duty", toml::Value::Float(cfg.effective_c1_duty()));
    }
    let status = match failure {
        None => "complete".to_string(),
        Some(e) => format!("failed:{}", e.category()),
    };
    log.set_meta("run.status", toml::Value::String(status));
    let list = warnings.iter().cloned().map(toml::Value::String).collect();
    log.set_meta("run.warnings", toml::Value::Array(list));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Phase;

    fn quiet(profile: Profile, t_set: f64, v_max: u32) -> TrialConfig {
        let mut cfg = TrialConfig::default().with_cell(profile, t_set, 3);
        cfg.noise.sigma_t = 0.0;
        cfg.noise.sigma_f = 0.0;
        cfg.v_max = v_max;
        cfg
    }

    #[test]
    fn one_c2_cycle_spans_110_s() {
        let log = run_trial(&quiet(Profile::C2, 140.0, 1)).unwrap();
        // 550 driven periods plus the terminal row
        assert_eq!(log.len(), 551);
        let last = log.rows.last().unwrap();
        assert!((last.time_s - 110.0).abs() < 1e-9);
        assert!((log.len() as f64 * 0.2 - (110.0 + 0.2)).abs() < 1e-9);
        assert_eq!(log.rows.iter().filter(|r| r.phase == Some(Phase::Heating)).count(), 225);
        assert!(log.rows.iter().all(|r| r.cycle == 1));
    }

    #[test]
    fn rows_respect_loop_invariants() {
        for profile in Profile::ALL {
            let log = run_trial(&quiet(profile, 140.0, 3)).unwrap();
            assert_eq!(log.rows[0].force_true, 2.2 * crate::plant::phase_fraction(35.16, &TrialConfig::default().fatigue));
            for w in log.rows.windows(2) {
                assert!((w[1].time_s - w[0].time_s - 0.2).abs() < 1e-9);
                assert!(w[1].cycle >= w[0].cycle);
            }
            for r in &log.rows {
                assert!((0.0..=1.0).contains(&r.duty_applied) && r.duty_applied <= r.duty_nominal);
                assert!(r.temp_true <= 140.0 + 1e-6, "{r:?}");
            }
            assert_eq!(log.rows.last().unwrap().cycle, 3);
            assert_eq!(log.meta("run.status"), Some("\"complete\""));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = TrialConfig::default().with_cell(Profile::C1, 150.0, 11);
        let mut short = cfg.clone();
        short.v_max = 4;
        let a = run_trial(&short).unwrap();
        let b = run_trial(&short).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let mut other = short.clone();
        other.noise.seed = 12;
        assert_ne!(a.rows, run_trial(&other).unwrap().rows);
    }

    #[test]
    fn stuck_cooling_keeps_partial_log() {
        let mut cfg = quiet(Profile::C1, 140.0, 5);
        // cooling from 140 to 35.2 C takes about 100 s
        cfg.generator.c1.t_cool = Some(35.2);
        cfg.generator.c1.cool_timeout_s = 30.0;
        let err = run_trial(&cfg).unwrap_err();
        assert!(matches!(err.error, Error::Stuck { cycle: 1, .. }));
        assert!(!err.partial.is_empty());
        assert_eq!(err.partial.meta("run.status"), Some("\"failed:stuck\""));
    }

    #[test]
    fn unreachable_band_times_out_every_cycle() {
        let mut cfg = quiet(Profile::C1, 300.0, 3);
        cfg.generator.c1.raise_unreachable_duty = false;
        cfg.generator.c1.heat_timeout_s = 60.0;
        let log = run_trial(&cfg).unwrap();
        assert_eq!(log.warnings().len(), 3);
        assert!(log.rows.iter().all(|r| r.phase != Some(Phase::Holding)));
    }
}
