//! From trial logs to per-cycle peak forces, long-life force curves and
//! the conservative temperature limit.
//!
//! C2 windows are read off the logged phase column: each heating period,
//! `heat_s` long. C1 windows follow the band rule on measured temperature:
//! from the first sample above `t_set - tol` to the point the wire drops
//! back below it, keeping only the second half so the approach transient is
//! discarded. The limit is the lowest plateau knee across the two profiles,
//! where a knee is the last tested temperature before F-infinity falls more
//! than `delta` below its running maximum.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{select_model, DecayFit, DecaySeries, Family};
use crate::generators::Phase;
use crate::harness::{Profile, TrialLog};

/// Default plateau-departure tolerance, N.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Hampel threshold in scaled MADs.
const HAMPEL_K: f64 = 5.0;
/// Consistency factor making the MAD a standard-deviation estimate.
const MAD_SCALE: f64 = 1.4826;
/// At most this fraction of a window may be discarded as outliers.
const MAX_OUTLIER_FRACTION: f64 = 0.2;

/// Log rows `[start, end)` belonging to cycle `cycle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleWindow {
    pub cycle: u32,
    pub start: usize,
    pub end: usize,
    pub profile: Profile,
}

impl CycleWindow {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Windows plus the non-fatal issues met while finding them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Windows {
    pub windows: Vec<CycleWindow>,
    pub warnings: Vec<String>,
}

pub fn windows_c2(log: &TrialLog, heat_s: f64) -> Result<Windows> {
    let dt = log.dt()?;
    let k = (heat_s / dt).round() as usize;
    if k == 0 {
        return Err(Error::Analysis(format!("heating period {heat_s} s is shorter than dt")));
    }
    let mut out = Windows::default();
    let mut prev: Option<Phase> = None;
    for (i, row) in log.rows.iter().enumerate() {
        let phase = row
            .phase
            .ok_or_else(|| Error::LogStructure(format!("row {i} has no phase; C2 windows need the phase column")))?;
        if phase == Phase::Heating && prev != Some(Phase::Heating) {
            if i + k <= log.rows.len() {
                out.windows.push(CycleWindow { cycle: row.cycle, start: i, end: i + k, profile: Profile::C2 });
            } else {
                let msg = format!("cycle {}: heating window truncated by end of log, dropped", row.cycle);
                log::warn!("{msg}");
                out.warnings.push(msg);
            }
        }
        prev = Some(phase);
    }
    Ok(out)
}

pub fn windows_c1(log: &TrialLog, t_set: f64, tol: f64) -> Windows {
    let threshold = t_set - tol;
    let mut out = Windows::default();
    let mut i = 0;
    while i < log.rows.len() {
        let cycle = log.rows[i].cycle;
        let mut j = i;
        while j < log.rows.len() && log.rows[j].cycle == cycle {
            j += 1;
        }
        let above = |r: usize| log.rows[r].temp_meas > threshold;
        match (i..j).find(|&r| above(r)) {
            Some(entry) => {
                let exit = (entry..j).rev().find(|&r| above(r)).expect("entry is above") + 1;
                let start = entry + (exit - entry) / 2;
                out.windows.push(CycleWindow { cycle, start, end: exit, profile: Profile::C1 });
            }
            None => {
                let msg = format!("cycle {cycle}: never entered the band above {threshold} C, skipped");
                log::warn!("{msg}");
                out.warnings.push(msg);
            }
        }
        i = j;
    }
    out
}

/// Windows for a log, using the profile and parameters in its metadata.
pub fn windows_for(log: &TrialLog) -> Result<Windows> {
    let cfg = log.config()?;
    Ok(match cfg.profile() {
        Profile::C1 => windows_c1(log, cfg.t_set(), cfg.generator.c1.tol),
        Profile::C2 => windows_c2(log, cfg.generator.c2.heat_s)?,
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub kept: Vec<f64>,
    pub removed: usize,
    /// Set when the outlier cap was hit and the window passed through.
    pub diagnostic: Option<String>,
}

/// Hampel filter: drop samples more than 5 scaled MADs from the median,
/// unless that would drop more than a fifth of the window.
pub fn filter_outliers(forces: &[f64]) -> Filtered {
    let pass = |diagnostic| Filtered { kept: forces.to_vec(), removed: 0, diagnostic };
    if forces.len() < 5 {
        return pass(None);
    }
    let mut sorted = forces.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = median(&sorted);
    let mut dev: Vec<f64> = forces.iter().map(|f| (f - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let limit = HAMPEL_K * MAD_SCALE * median(&dev);
    let kept: Vec<f64> = forces.iter().copied().filter(|f| (f - med).abs() <= limit).collect();
    let removed = forces.len() - kept.len();
    if removed as f64 > MAX_OUTLIER_FRACTION * forces.len() as f64 {
        return pass(Some(format!(
            "{removed} of {} samples flagged as outliers; above the {}% cap, window kept whole",
            forces.len(),
            MAX_OUTLIER_FRACTION * 100.0
        )));
    }
    Filtered { kept, removed, diagnostic: None }
}

/// Peak measured force per window after outlier filtering.
pub fn max_force_per_cycle(log: &TrialLog, windows: &[CycleWindow]) -> Result<(DecaySeries, Vec<String>)> {
    let mut points = Vec::with_capacity(windows.len());
    let mut warnings = Vec::new();
    for w in windows {
        if w.end > log.rows.len() || w.start >= w.end {
            return Err(Error::Analysis(format!("window {}..{} is invalid for a {}-row log", w.start, w.end, log.len())));
        }
        let forces: Vec<f64> = log.rows[w.start..w.end].iter().map(|r| r.force_meas).collect();
        let filtered = filter_outliers(&forces);
        if let Some(d) = filtered.diagnostic {
            warnings.push(format!("cycle {}: {d}", w.cycle));
        }
        match filtered.kept.iter().copied().reduce(f64::max) {
            Some(peak) => points.push((w.cycle, peak)),
            None => warnings.push(format!("cycle {}: window empty after filtering, omitted", w.cycle)),
        }
    }
    let t_set = log.t_set().unwrap_or(f64::NAN);
    Ok((DecaySeries::new(points, "trial", t_set)?, warnings))
}

/// Everything derived from one log.
#[derive(Debug, Clone)]
pub struct TrialAnalysis {
    pub profile: Profile,
    pub t_set: f64,
    pub series: DecaySeries,
    pub fit: DecayFit,
    pub warnings: Vec<String>,
}

pub fn analyze_trial(log: &TrialLog) -> Result<TrialAnalysis> {
    let profile = log.profile()?;
    let t_set = log.t_set()?;
    let found = windows_for(log)?;
    let (mut series, more) = max_force_per_cycle(log, &found.windows)?;
    series.label = format!("{profile}_{t_set}C");
    let fit = select_model(&series)?;
    let mut warnings = found.warnings;
    warnings.extend(more);
    Ok(TrialAnalysis { profile, t_set, series, fit, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t_set: f64,
    pub f_inf: f64,
    pub family: Family,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceCurve {
    pub profile: Profile,
    pub points: Vec<CurvePoint>,
}

impl ForceCurve {
    pub fn temperatures(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_set).collect()
    }
}

pub fn build_force_curve(profile: Profile, fits: &[(f64, DecayFit)]) -> Result<ForceCurve> {
    let mut points: Vec<CurvePoint> = fits
        .iter()
        .map(|(t, f)| CurvePoint { t_set: *t, f_inf: f.f_infinity, family: f.family(), rmse: f.rmse })
        .collect();
    points.sort_by(|a, b| a.t_set.total_cmp(&b.t_set));
    if let Some(w) = points.windows(2).find(|w| w[0].t_set == w[1].t_set) {
        return Err(Error::Analysis(format!("{profile} curve has two fits at {} C", w[0].t_set)));
    }
    if points.len() < 2 {
        return Err(Error::Analysis(format!("{profile} curve needs at least 2 temperatures, got {}", points.len())));
    }
    Ok(ForceCurve { profile, points })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitResult {
    pub limit: f64,
    pub knee_c1: f64,
    pub knee_c2: f64,
    pub diagnostics: Vec<String>,
}

/// Last temperature before the curve first falls more than `delta` below
/// its running maximum; `None` when it falls already at the second point.
fn knee(curve: &ForceCurve, delta: f64) -> Option<f64> {
    let mut running = f64::NEG_INFINITY;
    for (i, p) in curve.points.iter().enumerate() {
        if p.f_inf < running - delta {
            return (i > 1).then(|| curve.points[i - 1].t_set);
        }
        running = running.max(p.f_inf);
    }
    curve.points.last().map(|p| p.t_set)
}

pub fn select_limit(c1: &ForceCurve, c2: &ForceCurve, delta: f64) -> Result<LimitResult> {
    if c1.profile != Profile::C1 || c2.profile != Profile::C2 {
        return Err(Error::Analysis("select_limit needs one c1 and one c2 curve".into()));
    }
    for c in [c1, c2] {
        if c.points.len() < 3 {
            return Err(Error::Analysis(format!("{} curve needs at least 3 points, got {}", c.profile, c.points.len())));
        }
    }
    let lo = c1.points[0].t_set.max(c2.points[0].t_set);
    let hi = c1.points.last().unwrap().t_set.min(c2.points.last().unwrap().t_set);
    if lo > hi {
        return Err(Error::Analysis(format!("curves do not overlap ({lo} C > {hi} C)")));
    }
    let mut diagnostics = Vec::new();
    let mut knee_of = |c: &ForceCurve| match knee(c, delta) {
        Some(t) => t,
        None => {
            let t = c.points[0].t_set;
            diagnostics.push(format!("{} curve has no plateau; using its lowest temperature {t} C", c.profile));
            t
        }
    };
    let knee_c1 = knee_of(c1);
    let knee_c2 = knee_of(c2);
    let limit = knee_c1.min(knee_c2).min(hi);
    Ok(LimitResult { limit, knee_c1, knee_c2, diagnostics })
}

/// `cycle,f_max` rows.
pub fn fmax_csv(series: &DecaySeries) -> String {
    let mut out = String::from("cycle,f_max\n");
    for (v, f) in &series.points {
        let _ = writeln!(out, "{v},{f}");
    }
    out
}

/// `profile,t_set_C,f_inf_N,family,rmse` rows with fixed six decimals, so
/// reruns are byte-stable.
pub fn curve_csv(curves: &[ForceCurve]) -> String {
    let mut out = String::from("profile,t_set_C,f_inf_N,family,rmse\n");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(out, "{},{:.6},{:.6},{},{:.6}", c.profile, p.t_set, p.f_inf, p.family, p.rmse);
        }
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<ForceCurve>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "profile,t_set_C,f_inf_N,family,rmse" => {}
        _ => return Err(Error::Parse { line: 1, message: "expected curve header `profile,t_set_C,f_inf_N,family,rmse`".into() }),
    }
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse { line: i + 1, message: m };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
        let family = match f[3] {
            "single" => Family::Single,
            "double" => Family::Double,
            other => return Err(bad(format!("unknown family `{other}`"))),
        };
        let point = CurvePoint { t_set: num(f[1])?, f_inf: num(f[2])?, family, rmse: num(f[4])? };
        match f[0].parse::<Profile>().map_err(|e| bad(e.to_string()))? {
            Profile::C1 => c1.push(point),
            Profile::C2 => c2.push(point),
        }
    }
    let mut curves = Vec::new();
    for (profile, mut points) in [(Profile::C1, c1), (Profile::C2, c2)] {
        if points.is_empty() {
            continue;
        }
        points.sort_by(|a, b| a.t_set.total_cmp(&b.t_set));
        if points.windows(2).any(|w| w[0].t_set == w[1].t_set) {
            return Err(Error::Analysis(format!("{profile} curve repeats a temperature")));
        }
        curves.push(ForceCurve { profile, points });
    }
    Ok(curves)
}
