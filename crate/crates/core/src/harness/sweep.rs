//! Temperature sweeps: one fresh wire per (profile, t_set) cell, run in
//! parallel, persisted as trial CSVs plus a resumable manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{Profile, SweepSpec, TrialConfig};
use crate::harness::log::TrialLog;
use crate::harness::trial::{run_trial, TrialFailure};

pub const MANIFEST: &str = "manifest.csv";
const MANIFEST_HEADER: &str = "cell,profile,t_set_C,seed,config_hash,status,path";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub profile: Profile,
    pub t_set: f64,
    pub seed: u64,
}

impl Cell {
    /// File stem such as `c1_140C`.
    pub fn name(&self) -> String {
        format!("{}_{}C", self.profile, self.t_set)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-cell noise seed; depends only on the cell, never on run order.
/// Kept to 63 bits so it fits a TOML integer.
pub fn cell_seed(base: u64, profile: Profile, t_set: f64) -> u64 {
    let tag = match profile {
        Profile::C1 => 1,
        Profile::C2 => 2,
    };
    splitmix64(splitmix64(splitmix64(base) ^ t_set.to_bits()) ^ tag) >> 1
}

/// Cells in canonical order: profile, then ascending t_set.
pub fn plan(spec: &SweepSpec) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for (profile, grid) in [(Profile::C1, &spec.c1_t_sets), (Profile::C2, &spec.c2_t_sets)] {
        let mut temps = grid.clone();
        temps.sort_by(f64::total_cmp);
        if temps.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config(format!("duplicate temperature in the {profile} grid")));
        }
        cells.extend(temps.into_iter().map(|t_set| Cell { profile, t_set, seed: cell_seed(spec.seed, profile, t_set) }));
    }
    if cells.is_empty() {
        return Err(Error::config("sweep has no cells"));
    }
    Ok(cells)
}

#[derive(Debug)]
pub struct CellRun {
    pub cell: Cell,
    pub config: TrialConfig,
    pub result: std::result::Result<TrialLog, TrialFailure>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

/// Run every cell; a failing cell does not stop the others. `jobs = 0`
/// uses all cores. Output order matches `cells`.
pub fn run_sweep(base: &TrialConfig, cells: &[Cell], jobs: usize) -> Result<Vec<CellRun>> {
    let run = |cell: &Cell| {
        let config = base.with_cell(cell.profile, cell.t_set, cell.seed);
        let result = run_trial(&config);
        CellRun { cell: *cell, config, result }
    };
    Ok(pool(jobs)?.install(|| cells.par_iter().map(run).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub cell: String,
    pub profile: Profile,
    pub t_set: f64,
    pub seed: u64,
    pub config_hash: String,
    /// `ok` or `failed:<category>`.
    pub status: String,
    /// Relative to the sweep directory.
    pub path: String,
}

impl ManifestEntry {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for e in entries {
        let _ = writeln!(out, "{},{},{},{},{},{},{}", e.cell, e.profile, e.t_set, e.seed, e.config_hash, e.status, e.path);
    }
    fs::write(dir.join(MANIFEST), out)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == MANIFEST_HEADER => {}
        _ => return Err(Error::Parse { line: 1, message: format!("manifest header must be `{MANIFEST_HEADER}`") }),
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse { line: i + 1, message: m };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 manifest fields, found {}", f.len())));
        }
        entries.push(ManifestEntry {
            cell: f[0].to_string(),
            profile: f[1].parse().map_err(|e: Error| bad(e.to_string()))?,
            t_set: f[2].parse().map_err(|_| bad(format!("bad t_set `{}`", f[2])))?,
            seed: f[3].parse().map_err(|_| bad(format!("bad seed `{}`", f[3])))?,
            config_hash: f[4].to_string(),
            status: f[5].to_string(),
            path: f[6].to_string(),
        });
    }
    Ok(entries)
}

/// Run a sweep into `dir`, writing one CSV per cell and the manifest.
/// With `resume`, cells already recorded as `ok` with an unchanged config
/// hash and an existing file are not re-run.
pub fn sweep_to_dir(base: &TrialConfig, spec: &SweepSpec, dir: &Path, jobs: usize, resume: bool) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(dir)?;
    let cells = plan(spec)?;
    let previous = if resume && dir.join(MANIFEST).exists() { read_manifest(dir)? } else { Vec::new() };
    let reusable = |cell: &Cell, hash: &str| {
        previous
            .iter()
            .find(|e| e.cell == cell.name() && e.config_hash == hash && e.is_ok() && dir.join(&e.path).exists())
            .cloned()
    };

    let mut entries: Vec<Option<ManifestEntry>> = Vec::with_capacity(cells.len());
    let mut todo = Vec::new();
    for cell in &cells {
        let hash = base.with_cell(cell.profile, cell.t_set, cell.seed).hash();
        match reusable(cell, &hash) {
            Some(e) => {
                log::info!("resume: keeping {}", e.cell);
                entries.push(Some(e));
            }
            None => {
                todo.push(*cell);
                entries.push(None);
            }
        }
    }

    let runs = run_sweep(base, &todo, jobs)?;
    let mut fresh = runs.into_iter();
    for slot in entries.iter_mut().filter(|e| e.is_none()) {
        let run = fresh.next().expect("one run per pending cell");
        let path = format!("{}.csv", run.cell.name());
        let (log, status) = match &run.result {
            Ok(log) => (log, "ok".to_string()),
            Err(f) => {
                log::warn!("cell {} failed: {}", run.cell.name(), f.error);
                (f.partial.as_ref(), format!("failed:{}", f.error.category()))
            }
        };
        log.write_csv(&dir.join(&path))?;
        *slot = Some(ManifestEntry {
            cell: run.cell.name(),
            profile: run.cell.profile,
            t_set: run.cell.t_set,
            seed: run.cell.seed,
            config_hash: run.config.hash(),
            status,
            path,
        });
    }
    let entries: Vec<ManifestEntry> = entries.into_iter().map(|e| e.expect("every cell resolved")).collect();
    write_manifest(dir, &entries)?;
    Ok(entries)
}
