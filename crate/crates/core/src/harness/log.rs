//! Trial logs and their self-describing CSV form.
//!
//! A file starts with `# key=value` metadata lines (the flattened trial
//! config plus `run.*` facts about the run), then a fixed header and one
//! row per control period. Floats use the shortest representation that
//! parses back to the same value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::generators::Phase;
use crate::harness::config::{Profile, TrialConfig};

pub const COLUMNS: [&str; 9] = [
    "time_s",
    "cycle",
    "phase",
    "duty_nominal",
    "duty_applied",
    "temp_true_C",
    "temp_meas_C",
    "force_true_N",
    "force_meas_N",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRow {
    pub time_s: f64,
    pub cycle: u32,
    /// Controller phase; absent in logs recorded without annotations.
    pub phase: Option<Phase>,
    pub duty_nominal: f64,
    pub duty_applied: f64,
    pub temp_true: f64,
    pub temp_meas: f64,
    pub force_true: f64,
    pub force_meas: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialLog {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<TrialRow>,
}

impl TrialLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Raw TOML literal stored under `key`.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn meta_value(&self, key: &str) -> Option<toml::Value> {
        let raw = self.meta(key)?;
        let doc: toml::Table = format!("v = {raw}").parse().ok()?;
        doc.get("v").cloned()
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        match self.meta_value(key)? {
            toml::Value::Float(x) => Some(x),
            toml::Value::Integer(i) => Some(i as f64),
            _ => None,
        }
    }

    pub fn set_meta(&mut self, key: &str, value: toml::Value) {
        let literal = value.to_string();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = literal,
            None => self.metadata.push((key.to_string(), literal)),
        }
    }

    /// The trial config echoed in the header.
    pub fn config(&self) -> Result<TrialConfig> {
        TrialConfig::from_metadata(&self.metadata)
    }

    pub fn profile(&self) -> Result<Profile> {
        match self.meta_value("generator.profile") {
            Some(toml::Value::String(s)) => s.parse(),
            _ => Err(Error::LogStructure("log metadata lacks generator.profile".into())),
        }
    }

    pub fn t_set(&self) -> Result<f64> {
        self.meta_f64("supervisor.t_set")
            .ok_or_else(|| Error::LogStructure("log metadata lacks supervisor.t_set".into()))
    }

    pub fn dt(&self) -> Result<f64> {
        self.meta_f64("dt").ok_or_else(|| Error::LogStructure("log metadata lacks dt".into()))
    }

    pub fn warnings(&self) -> Vec<String> {
        match self.meta_value("run.warnings") {
            Some(toml::Value::Array(items)) => items.iter().filter_map(|v| v.as_str().map(String::from)).collect(),
            _ => Vec::new(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + self.metadata.len() + 1));
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            let phase = r.phase.map(|p| p.as_str()).unwrap_or("");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.time_s,
                r.cycle,
                phase,
                r.duty_nominal,
                r.duty_applied,
                r.temp_true,
                r.temp_meas,
                r.force_true,
                r.force_meas
            );
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<TrialLog> {
        let mut log = TrialLog::default();
        let mut header_seen = false;
        let mut last_line = 0;
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            last_line = lineno;
            let line = line.trim_end_matches('\r');
            if !header_seen {
                if let Some(meta) = line.strip_prefix('#') {
                    let (k, v) = meta.split_once('=').ok_or_else(|| parse_err(lineno, "metadata line lacks `=`"))?;
                    let key = k.trim();
                    if key.is_empty() {
                        return Err(parse_err(lineno, "empty metadata key"));
                    }
                    log.metadata.push((key.to_string(), v.trim().to_string()));
                    continue;
                }
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != COLUMNS {
                    return Err(parse_err(
                        lineno,
                        format!("malformed header `{line}`; expected `{}`", COLUMNS.join(",")),
                    ));
                }
                header_seen = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let row = parse_row(line, lineno)?;
            if let Some(prev) = log.rows.last() {
                if !(row.time_s > prev.time_s) {
                    return Err(parse_err(lineno, format!("time {} does not increase past {}", row.time_s, prev.time_s)));
                }
                if row.cycle < prev.cycle {
                    return Err(parse_err(lineno, format!("cycle {} decreases from {}", row.cycle, prev.cycle)));
                }
            }
            log.rows.push(row);
        }
        if !header_seen {
            return Err(parse_err(last_line.max(1), "missing column header"));
        }
        Ok(log)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<TrialLog> {
        let text = fs::read_to_string(path)?;
        TrialLog::parse_csv(&text)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_row(line: &str, lineno: usize) -> Result<TrialRow> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != COLUMNS.len() {
        return Err(parse_err(lineno, format!("expected {} columns, found {}", COLUMNS.len(), fields.len())));
    }
    let num = |i: usize| -> Result<f64> {
        fields[i]
            .parse::<f64>()
            .map_err(|_| parse_err(lineno, format!("column {}: `{}` is not a number", COLUMNS[i], fields[i])))
    };
    let cycle = fields[1]
        .parse::<u32>()
        .map_err(|_| parse_err(lineno, format!("column cycle: `{}` is not a cycle index", fields[1])))?;
    let phase = if fields[2].is_empty() {
        None
    } else {
        Some(fields[2].parse::<Phase>().map_err(|e| parse_err(lineno, format!("column phase: {e}")))?)
    };
    Ok(TrialRow {
        time_s: num(0)?,
        cycle,
        phase,
        duty_nominal: num(3)?,
        duty_applied: num(4)?,
        temp_true: num(5)?,
        temp_meas: num(6)?,
        force_true: num(7)?,
        force_meas: num(8)?,
    })
}

/// Numeric columns of an arbitrary headed CSV, each located by the first
/// matching alias. `#` lines are skipped.
pub fn read_columns(path: &Path, wanted: &[&[&str]]) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut index = Vec::with_capacity(wanted.len());
    for aliases in wanted {
        let i = names
            .iter()
            .position(|n| aliases.contains(n))
            .ok_or_else(|| parse_err(hline + 1, format!("no column named {}", aliases.join(" or "))))?;
        index.push(i);
    }
    let mut out = vec![Vec::new(); wanted.len()];
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(parse_err(i + 1, format!("expected {} columns, found {}", names.len(), fields.len())));
        }
        for (col, &j) in out.iter_mut().zip(&index) {
            let x = fields[j]
                .parse::<f64>()
                .map_err(|_| parse_err(i + 1, format!("`{}` is not a number", fields[j])))?;
            col.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrialLog {
        let mut log = TrialLog { metadata: vec![("dt".into(), "0.2".into())], rows: Vec::new() };
        for k in 0..5u32 {
            log.rows.push(TrialRow {
                time_s: f64::from(k) * 0.2,
                cycle: 1 + k / 3,
                phase: if k == 4 { None } else { Some(Phase::Heating) },
                duty_nominal: 0.5,
                duty_applied: 0.1 * f64::from(k) / 3.0,
                temp_true: 35.16 + std::f64::consts::PI * f64::from(k),
                temp_meas: 35.0 + 1e-7 * f64::from(k),
                force_true: 1.0 / 3.0,
                force_meas: -2.5e-12,
            });
        }
        log
    }

    #[test]
    fn round_trip_is_exact() {
        let log = sample();
        let back = TrialLog::parse_csv(&log.to_csv_string()).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.meta_f64("dt"), Some(0.2));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = sample().to_csv_string();
        let lines: Vec<&str> = text.lines().collect();
        // drop the tail of the last row: column mismatch on line 7
        let truncated = format!("{}\n{}", lines[..6].join("\n"), &lines[6][..10]);
        match TrialLog::parse_csv(&truncated) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        let bad_header = text.replace("force_meas_N", "force");
        assert!(matches!(TrialLog::parse_csv(&bad_header), Err(Error::Parse { line: 2, .. })));
        let swapped = format!("{}\n{}\n{}\n{}", lines[0], lines[1], lines[3], lines[2]);
        assert!(matches!(TrialLog::parse_csv(&swapped), Err(Error::Parse { line: 4, .. })));
        let garbage = text.replacen("0.5,", "abc,", 1);
        assert!(matches!(TrialLog::parse_csv(&garbage), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(TrialLog::parse_csv("# a=1\n"), Err(Error::Parse { .. })));
        assert!(matches!(TrialLog::parse_csv("# nonsense\n"), Err(Error::Parse { line: 1, .. })));
    }
}
