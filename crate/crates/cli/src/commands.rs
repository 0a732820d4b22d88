use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};

use sma_core::analysis::{self, ForceCurve, TrialAnalysis};
use sma_core::harness::{self, Profile, SweepSpec, TrialConfig, TrialLog};
use sma_core::sysid::{self, Estimator, ExcitationConfig};
use sma_core::thermal::ThermalParams;
use sma_core::{plot, Error, Result};

pub enum Outcome {
    Done,
    /// Some sweep cells failed; the rest were written.
    Partial,
}

fn ctx(path: &Path) -> impl Fn(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(ctx(path))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(ctx(dir))
}

fn read_log(path: &Path) -> Result<TrialLog> {
    let text = fs::read_to_string(path).map_err(ctx(path))?;
    TrialLog::parse_csv(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        other => other,
    })
}

fn load_config(path: Option<&Path>) -> Result<(TrialConfig, SweepSpec)> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(ctx(p))?;
            harness::load_str(&text).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                other => other,
            })
        }
        None => harness::load_str(""),
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    /// Instrumental variables (lagged reading as instrument).
    Iv,
    /// Ordinary least squares.
    Ols,
}

#[derive(Args)]
pub struct IdentifyArgs {
    /// CSV with a header containing duty (`duty_applied` or `duty`) and
    /// temperature (`temp_meas_C` or `temp_C`) columns.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    log: Option<PathBuf>,
    /// Generate a 10-minute random-step excitation of the reference model.
    #[arg(long)]
    synthetic: bool,
    /// Excitation seed for --synthetic.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Temperature noise std for --synthetic, degC.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Control period of --log, s.
    #[arg(long, default_value_t = 0.2)]
    dt: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Iv)]
    estimator: EstimatorArg,
    /// Reference model for --synthetic; defaults to the built-in config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

pub fn identify(a: IdentifyArgs) -> Result<Outcome> {
    let estimator = match a.estimator {
        EstimatorArg::Iv => Estimator::InstrumentalVariable,
        EstimatorArg::Ols => Estimator::LeastSquares,
    };
    ensure_dir(&a.out)?;
    let (temps, duties, dt) = match &a.log {
        Some(path) => {
            if !path.exists() {
                return Err(ctx(path)(io::Error::from(io::ErrorKind::NotFound)));
            }
            let cols = harness::log::read_columns(path, &[&["duty_applied", "duty"], &["temp_meas_C", "temp_C"]])?;
            let [duties, temps]: [Vec<f64>; 2] = cols.try_into().expect("two columns requested");
            (temps, duties, a.dt)
        }
        None => {
            let (cfg, _) = load_config(a.config.as_deref())?;
            let reference: ThermalParams = cfg.thermal_params();
            let exc = ExcitationConfig { seed: a.seed, dt: cfg.dt, ..Default::default() };
            let (temps, duties) = sysid::synthetic_log(&reference, &exc, a.noise, a.seed.wrapping_add(1))?;
            let mut csv = String::from("time_s,duty,temp_C\n");
            for (k, (u, t)) in duties.iter().zip(&temps).enumerate() {
                csv.push_str(&format!("{},{u},{t}\n", k as f64 * cfg.dt));
            }
            write(&a.out.join("excitation.csv"), csv)?;
            (temps, duties, cfg.dt)
        }
    };
    let id = sysid::fit_linear_with(&temps, &duties, dt, estimator)?;
    let p = id.params;
    println!("alpha1 = {:.6} 1/s", p.alpha1);
    println!("alpha2 = {:.6} C/s", p.alpha2);
    println!("t_amb  = {:.6} C", p.t_amb);
    println!("residual rmse = {:.6} C over {} samples", id.residual_rmse, id.sample_count);
    for d in &id.diagnostics {
        log::warn!("{d}");
    }
    let csv = format!(
        "alpha1,alpha2,t_amb,dt,residual_rmse,samples\n{},{},{},{},{},{}\n",
        p.alpha1, p.alpha2, p.t_amb, p.dt, id.residual_rmse, id.sample_count
    );
    write(&a.out.join("id.csv"), csv)?;
    Ok(Outcome::Done)
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// Temperature limit, degC.
    #[arg(long)]
    t_set: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cycles to run.
    #[arg(long)]
    cycles: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_profile(s: &str) -> std::result::Result<Profile, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn simulate(a: SimulateArgs) -> Result<Outcome> {
    let (mut cfg, _) = load_config(a.config.as_deref())?;
    if let Some(p) = a.profile {
        cfg.generator.profile = p;
    }
    if let Some(t) = a.t_set {
        cfg.supervisor.t_set = t;
    }
    if let Some(s) = a.seed {
        cfg.noise.seed = s;
    }
    if let Some(v) = a.cycles {
        cfg.v_max = v;
    }
    cfg.validate()?;
    ensure_dir(&a.out)?;
    let path = a.out.join(format!("{}_{}C.csv", cfg.profile(), cfg.t_set()));
    match harness::run_trial(&cfg) {
        Ok(log) => {
            log.write_csv(&path)?;
            println!("{} ({} rows)", path.display(), log.len());
            Ok(Outcome::Done)
        }
        Err(f) => {
            f.partial.write_csv(&path)?;
            log::warn!("partial log written to {}", path.display());
            Err(f.error)
        }
    }
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Skip cells already completed with the same config.
    #[arg(long)]
    resume: bool,
}

pub fn sweep(a: SweepArgs) -> Result<Outcome> {
    let (cfg, spec) = load_config(a.config.as_deref())?;
    let entries = harness::sweep_to_dir(&cfg, &spec, &a.out, a.jobs, a.resume)?;
    let failed: Vec<_> = entries.iter().filter(|e| !e.is_ok()).collect();
    println!("{} cells, {} ok, {} failed", entries.len(), entries.len() - failed.len(), failed.len());
    for e in &failed {
        println!("  {} {}", e.cell, e.status);
    }
    Ok(if failed.is_empty() { Outcome::Done } else { Outcome::Partial })
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Directory of trial CSVs.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn trial_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(ctx(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| p.file_name().is_some_and(|n| n != harness::sweep::MANIFEST))
        .collect();
    files.sort();
    Ok(files)
}

pub fn analyze(a: AnalyzeArgs) -> Result<Outcome> {
    let files = trial_files(&a.input)?;
    let mut results: Vec<(String, TrialAnalysis)> = Vec::new();
    for path in &files {
        let log = read_log(path)?;
        if log.meta("run.status").is_some_and(|s| s != "\"complete\"") {
            log::warn!("{}: incomplete trial, skipped", path.display());
            continue;
        }
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let result = analysis::analyze_trial(&log)?;
        for w in &result.warnings {
            log::warn!("{stem}: {w}");
        }
        results.push((stem, result));
    }
    if results.is_empty() {
        return Err(Error::Analysis(format!("no complete trial logs in {}", a.input.display())));
    }

    ensure_dir(&a.out)?;
    let fmax_dir = a.out.join("fmax");
    ensure_dir(&fmax_dir)?;
    for (stem, r) in &results {
        write(&fmax_dir.join(format!("{stem}.csv")), analysis::fmax_csv(&r.series))?;
    }

    let mut curves: Vec<ForceCurve> = Vec::new();
    for profile in Profile::ALL {
        let mut trials: Vec<&TrialAnalysis> = results.iter().map(|(_, r)| r).filter(|r| r.profile == profile).collect();
        if trials.is_empty() {
            continue;
        }
        trials.sort_by(|x, y| x.t_set.total_cmp(&y.t_set));
        write(&a.out.join(format!("fmax_{profile}.svg")), plot::fmax_svg(&format!("Peak force per cycle, {profile}"), &trials))?;
        let fits: Vec<_> = trials.iter().map(|r| (r.t_set, r.fit.clone())).collect();
        match analysis::build_force_curve(profile, &fits) {
            Ok(c) => curves.push(c),
            Err(e) => log::warn!("{profile}: no force curve: {e}"),
        }
    }
    if curves.is_empty() {
        return Err(Error::Analysis("no profile has trials at two or more temperatures".into()));
    }
    write(&a.out.join("curve.csv"), analysis::curve_csv(&curves))?;
    write(&a.out.join("curve.svg"), plot::curve_svg(&curves, None))?;
    for c in &curves {
        for p in &c.points {
            println!("{} {:>7.1} C  F_inf = {:.4} N  ({}, rmse {:.4})", c.profile, p.t_set, p.f_inf, p.family, p.rmse);
        }
    }
    Ok(Outcome::Done)
}

#[derive(Args)]
pub struct LimitArgs {
    /// Directory holding curve.csv.
    #[arg(long)]
    curves: PathBuf,
    /// Plateau-departure tolerance, N.
    #[arg(long, default_value_t = analysis::DEFAULT_DELTA)]
    delta: f64,
    /// Where to write limit.txt; defaults to the curves directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn limit(a: LimitArgs) -> Result<Outcome> {
    if !(a.delta >= 0.0) {
        return Err(Error::Config(format!("delta must be non-negative, got {}", a.delta)));
    }
    let path = a.curves.join("curve.csv");
    let curves = analysis::parse_curve_csv(&fs::read_to_string(&path).map_err(ctx(&path))?)?;
    let find = |p: Profile| curves.iter().find(|c| c.profile == p);
    let (Some(c1), Some(c2)) = (find(Profile::C1), find(Profile::C2)) else {
        return Err(Error::Analysis("limit selection needs both c1 and c2 curves".into()));
    };
    let r = analysis::select_limit(c1, c2, a.delta)?;
    for d in &r.diagnostics {
        log::warn!("{d}");
    }
    let out = a.out.unwrap_or(a.curves);
    ensure_dir(&out)?;
    write(&out.join("limit.txt"), format!("{}\n", r.limit))?;
    println!("{}", r.limit);
    log::info!("c1 knee {} C, c2 knee {} C", r.knee_c1, r.knee_c2);
    Ok(Outcome::Done)
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 140.0)]
    t_low: f64,
    #[arg(long, default_value_t = 230.0)]
    t_high: f64,
    /// Total cycles per specimen, re-cycling included.
    #[arg(long, default_value_t = 150)]
    cycles: u32,
    /// Final cycles run by both specimens at the common temperature.
    #[arg(long, default_value_t = 50)]
    recycle: u32,
    #[arg(long, default_value_t = 140.0)]
    t_recycle: f64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the report as validate.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn validate(a: ValidateArgs) -> Result<Outcome> {
    let (cfg, _) = load_config(a.config.as_deref())?;
    let ab = harness::AbConfig {
        t_low: a.t_low,
        t_high: a.t_high,
        cycles: a.cycles,
        recycle_cycles: a.recycle,
        t_recycle: a.t_recycle,
    };
    let r = harness::validate_ab(&cfg, &ab)?;
    println!("fatigue cycles {} then {} cycles at {} C", r.fatigue_cycles, r.recycle_cycles, r.t_match);
    println!("low  {:>6.1} C: d = {:.4}, force at {} C = {:.4} N", r.t_low, r.d_low, r.t_match, r.force_low);
    println!("high {:>6.1} C: d = {:.4}, force at {} C = {:.4} N", r.t_high, r.d_high, r.t_match, r.force_high);
    println!("ratio {:.4}", r.ratio);
    if let Some(dir) = a.out {
        ensure_dir(&dir)?;
        let csv = format!(
            "t_low,t_high,fatigue_cycles,recycle_cycles,t_match,d_low,d_high,force_low,force_high,ratio\n{},{},{},{},{},{},{},{},{},{}\n",
            r.t_low, r.t_high, r.fatigue_cycles, r.recycle_cycles, r.t_match, r.d_low, r.d_high, r.force_low, r.force_high, r.ratio
        );
        write(&dir.join("validate.csv"), csv)?;
    }
    Ok(Outcome::Done)
}

#[derive(Args)]
pub struct PlotArgs {
    /// Trial CSV to plot.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

pub fn plot(a: PlotArgs) -> Result<Outcome> {
    let log = read_log(&a.log)?;
    let stem = a.log.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trial".into());
    ensure_dir(&a.out)?;
    let path = a.out.join(format!("{stem}.svg"));
    write(&path, plot::trial_svg(&log, &stem))?;
    println!("{}", path.display());
    Ok(Outcome::Done)
}
