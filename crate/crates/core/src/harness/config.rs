//! Trial configuration: TOML loading over built-in defaults, validation,
//! derived runtime objects and the flat metadata echoed into every log.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generators::{C1Config, C2Config, Generator};
use crate::plant::{FatigueParams, NoiseParams};
use crate::supervisor::SupervisorConfig;
use crate::thermal::{discretize, DiscreteCoeffs, ThermalParams};

pub const DEFAULT_TOML: &str = include_str!("../../config/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    C1,
    C2,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::C1, Profile::C2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Profile::C1 => "c1",
            Profile::C2 => "c2",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c1" => Ok(Profile::C1),
            "c2" => Ok(Profile::C2),
            other => Err(Error::config(format!("unknown profile `{other}` (expected c1 or c2)"))),
        }
    }
}

/// Continuous thermal coefficients without the period, as written in files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    pub alpha1: f64,
    pub alpha2: f64,
    pub t_amb: f64,
}

impl ThermalSection {
    pub fn with_dt(&self, dt: f64) -> ThermalParams {
        ThermalParams { alpha1: self.alpha1, alpha2: self.alpha2, t_amb: self.t_amb, dt }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisorSection {
    pub t_set: f64,
    pub gamma: f64,
    /// Controller-side model; the plant's own model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ThermalSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C1Section {
    pub tol: f64,
    pub hold_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cool: Option<f64>,
    pub duty: f64,
    pub cool_timeout_s: f64,
    pub heat_timeout_s: f64,
    pub raise_unreachable_duty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C2Section {
    pub heat_s: f64,
    pub cool_s: f64,
    pub duty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSection {
    pub profile: Profile,
    pub c1: C1Section,
    pub c2: C2Section,
}

/// Everything needed to run one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub dt: f64,
    pub v_max: u32,
    pub thermal: ThermalSection,
    pub fatigue: FatigueParams,
    pub noise: NoiseParams,
    pub supervisor: SupervisorSection,
    pub generator: GeneratorSection,
}

/// Grid and seed of a temperature sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub seed: u64,
    pub c1_t_sets: Vec<f64>,
    pub c2_t_sets: Vec<f64>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        load_str("").expect("built-in default config is valid").0
    }
}

impl Default for SweepSpec {
    fn default() -> Self {
        load_str("").expect("built-in default config is valid").1
    }
}

/// Parse a config document layered over the built-in defaults.
pub fn load_str(text: &str) -> Result<(TrialConfig, SweepSpec)> {
    let mut table: toml::Table = DEFAULT_TOML.parse().map_err(|e| Error::config(format!("{e}")))?;
    let user: toml::Table = text.parse().map_err(|e| Error::config(format!("{e}")))?;
    merge(&mut table, user);
    let sweep = table.remove("sweep").ok_or_else(|| Error::config("missing [sweep] section"))?;
    let sweep: SweepSpec = sweep.try_into().map_err(|e| Error::config(format!("[sweep]: {e}")))?;
    let cfg: TrialConfig = toml::Value::Table(table).try_into().map_err(|e| Error::config(format!("{e}")))?;
    cfg.validate()?;
    if sweep.c1_t_sets.is_empty() && sweep.c2_t_sets.is_empty() {
        return Err(Error::config("sweep grids are both empty"));
    }
    Ok((cfg, sweep))
}

pub fn load_file(path: &Path) -> Result<(TrialConfig, SweepSpec)> {
    let text = std::fs::read_to_string(path)?;
    load_str(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.v_max < 1 {
            return Err(Error::config("v_max must be at least 1"));
        }
        self.thermal_params().validate()?;
        self.fatigue.validate()?;
        self.noise.validate()?;
        if i64::try_from(self.noise.seed).is_err() {
            return Err(Error::config(format!("seed {} does not fit in 63 bits", self.noise.seed)));
        }
        if let Some(m) = &self.supervisor.model {
            m.with_dt(self.dt).validate()?;
        }
        self.supervisor()?;
        self.c1_config()?.validate()?;
        self.c2_config().validate()?;
        Ok(())
    }

    pub fn thermal_params(&self) -> ThermalParams {
        self.thermal.with_dt(self.dt)
    }

    pub fn plant_coeffs(&self) -> Result<DiscreteCoeffs> {
        discretize(&self.thermal_params())
    }

    /// The controller model: the override when given, else the plant model.
    pub fn model_params(&self) -> ThermalParams {
        self.supervisor.model.unwrap_or(self.thermal).with_dt(self.dt)
    }

    pub fn supervisor(&self) -> Result<SupervisorConfig> {
        let coeffs = discretize(&self.model_params())?;
        SupervisorConfig::new(self.supervisor.t_set, self.supervisor.gamma, coeffs)
    }

    pub fn t_cool(&self) -> f64 {
        self.generator.c1.t_cool.unwrap_or(self.thermal.t_amb + 1.0)
    }

    /// Nominal C1 duty actually used. When the configured duty cannot bring
    /// the controller model up to `t_set`, and raising is enabled, the duty
    /// whose model equilibrium is `t_set + tol` is used instead (capped at 1).
    pub fn effective_c1_duty(&self) -> f64 {
        let c1 = &self.generator.c1;
        let model = self.model_params();
        if c1.raise_unreachable_duty && model.steady_temperature(c1.duty) < self.supervisor.t_set {
            model.steady_duty(self.supervisor.t_set + c1.tol).min(1.0)
        } else {
            c1.duty
        }
    }

    pub fn c1_config(&self) -> Result<C1Config> {
        let c1 = &self.generator.c1;
        let cfg = C1Config {
            t_set: self.supervisor.t_set,
            tol: c1.tol,
            hold_s: c1.hold_s,
            t_cool: self.t_cool(),
            duty: self.effective_c1_duty(),
            v_max: self.v_max,
            cool_timeout_s: c1.cool_timeout_s,
            heat_timeout_s: c1.heat_timeout_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn c2_config(&self) -> C2Config {
        let c2 = &self.generator.c2;
        C2Config { heat_s: c2.heat_s, cool_s: c2.cool_s, duty: c2.duty, v_max: self.v_max }
    }

    pub fn generator(&self) -> Result<Generator> {
        Ok(match self.generator.profile {
            Profile::C1 => Generator::c1(self.c1_config()?),
            Profile::C2 => {
                let cfg = self.c2_config();
                cfg.validate()?;
                Generator::c2(cfg)
            }
        })
    }

    pub fn profile(&self) -> Profile {
        self.generator.profile
    }

    pub fn t_set(&self) -> f64 {
        self.supervisor.t_set
    }

    pub fn with_cell(&self, profile: Profile, t_set: f64, seed: u64) -> TrialConfig {
        let mut cfg = self.clone();
        cfg.generator.profile = profile;
        cfg.supervisor.t_set = t_set;
        cfg.noise.seed = seed;
        cfg
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Flat `dotted.key` / TOML-literal pairs in canonical order.
    pub fn to_metadata(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        out
    }

    /// Rebuild a config from metadata pairs written by [`to_metadata`].
    /// Keys outside the config schema are ignored.
    ///
    /// [`to_metadata`]: TrialConfig::to_metadata
    pub fn from_metadata(pairs: &[(String, String)]) -> Result<TrialConfig> {
        let mut doc = String::new();
        for (k, v) in pairs {
            if !k.starts_with("run.") {
                doc.push_str(&format!("{k} = {v}\n"));
            }
        }
        let cfg: TrialConfig = toml::from_str(&doc).map_err(|e| Error::LogStructure(format!("metadata: {e}")))?;
        Ok(cfg)
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
