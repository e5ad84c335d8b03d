//! Results of one command: named checks, CSV tables and a JSON summary.

use std::path::Path;

use serde::Serialize;
use stable_brw::stats::Estimate;

/// How a reported number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Monte Carlo, with a standard error.
    Estimate,
    /// Closed form or deterministic computation.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub se: Option<f64>,
    pub provenance: Provenance,
    pub target: Option<f64>,
    /// `None` for a diagnostic that is reported but not judged.
    pub pass: Option<bool>,
    pub detail: String,
}

impl Check {
    pub fn estimate(name: impl Into<String>, e: Estimate, target: Option<f64>, pass: Option<bool>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: e.value,
            se: Some(e.se),
            provenance: Provenance::Estimate,
            target,
            pass,
            detail: detail.into(),
        }
    }

    pub fn exact(name: impl Into<String>, value: f64, target: Option<f64>, pass: Option<bool>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value,
            se: None,
            provenance: Provenance::Exact,
            target,
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub file: String,
    #[serde(skip)]
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultBundle {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub runtime_s: f64,
    pub pass: bool,
}

impl ResultBundle {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            seed,
            config,
            checks: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
            runtime_s: 0.0,
            pass: true,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn table(&mut self, file: &str, csv: String) {
        self.tables.push(Table { file: file.into(), csv });
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Judged checks whose name starts with `prefix`, and whether all pass.
    pub fn all_pass(&self, prefix: &str) -> bool {
        let mut judged = self.checks.iter().filter(|c| c.name.starts_with(prefix)).filter_map(|c| c.pass).peekable();
        judged.peek().is_some() && judged.all(|p| p)
    }

    pub fn finish(&mut self, runtime_s: f64) {
        self.runtime_s = runtime_s;
        self.pass = self.checks.iter().all(|c| c.pass != Some(false));
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    /// Writes every table and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for t in &self.tables {
            std::fs::write(dir.join(&t.file), &t.csv)?;
        }
        std::fs::write(dir.join("summary.json"), self.summary_json())
    }

    /// One line per check, for the terminal.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = match c.pass {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "info",
            };
            let se = c.se.map_or(String::new(), |s| format!(" ± {s:.3e}"));
            let target = c.target.map_or(String::new(), |t| format!(" (target {})", num(t)));
            out.push_str(&format!("[{status}] {}: {}{se}{target} {}\n", c.name, num(c.value), c.detail));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.3e}")
    } else {
        format!("{x:.6}")
    }
}
