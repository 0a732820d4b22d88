//! Trial and sweep orchestration at a fixed control period.
//!
//! Measured temperature drives both the generator and the supervisor; the
//! true state is logged alongside for checking.

pub mod config;
pub mod log;
pub mod sweep;
pub mod trial;
pub mod validate;

pub use config::{load_file, load_str, Profile, SweepSpec, TrialConfig};
pub use log::{TrialLog, TrialRow};
pub use sweep::{plan, run_sweep, sweep_to_dir, Cell, CellRun, ManifestEntry};
pub use trial::{run_from, run_trial, TrialFailure};
pub use validate::{validate_ab, AbConfig, AbReport};
