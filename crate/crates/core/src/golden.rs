//! Plain-text table of reference constants.
//!
//! One entry per line as whitespace-separated `key=value` pairs with the keys
//! `name`, `alpha`, `theta`, `value` and `provenance`; `-` marks an unused
//! column and `#` starts a comment line.

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../data/golden_constants.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenEntry {
    pub name: String,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    pub value: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, Default)]
pub struct GoldenTable {
    entries: Vec<GoldenEntry>,
}

fn optional_number(raw: &str, line: usize) -> Result<Option<f64>> {
    if raw == "-" {
        return Ok(None);
    }
    raw.parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("line {line}: bad number '{raw}'")))
}

impl GoldenTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (mut name, mut alpha, mut theta, mut value, mut provenance) =
                (None, None, None, None, None);
            for field in line.split_whitespace() {
                let (key, val) = field.split_once('=').ok_or_else(|| {
                    Error::Parse(format!("line {}: field '{field}' is not key=value", idx + 1))
                })?;
                match key {
                    "name" => name = Some(val.to_string()),
                    "alpha" => alpha = Some(optional_number(val, idx + 1)?),
                    "theta" => theta = Some(optional_number(val, idx + 1)?),
                    "value" => value = optional_number(val, idx + 1)?,
                    "provenance" => provenance = Some(val.to_string()),
                    other => {
                        return Err(Error::Parse(format!("line {}: unknown key '{other}'", idx + 1)))
                    }
                }
            }
            let missing = |what: &str| Error::Parse(format!("line {}: missing {what}", idx + 1));
            entries.push(GoldenEntry {
                name: name.ok_or_else(|| missing("name"))?,
                alpha: alpha.ok_or_else(|| missing("alpha"))?,
                theta: theta.ok_or_else(|| missing("theta"))?,
                value: value.ok_or_else(|| missing("value"))?,
                provenance: provenance.ok_or_else(|| missing("provenance"))?,
            });
        }
        Ok(Self { entries })
    }

    /// The table shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled golden table is well formed")
    }

    pub fn entries(&self) -> &[GoldenEntry] {
        &self.entries
    }

    /// Looks up an entry by name and, when given, by α.
    pub fn get(&self, name: &str, alpha: Option<f64>) -> Option<&GoldenEntry> {
        self.entries.iter().find(|e| {
            e.name == name
                && match alpha {
                    Some(a) => e.alpha.is_some_and(|ea| (ea - a).abs() < 1e-12),
                    None => true,
                }
        })
    }

    pub fn value(&self, name: &str, alpha: Option<f64>) -> f64 {
        self.get(name, alpha)
            .unwrap_or_else(|| panic!("golden constant '{name}' (alpha {alpha:?}) missing"))
            .value
    }
}
