//! Loader for the flat key-value physical-constants file.
//!
//! The file format is one constant per line:
//!
//! ```text
//! rb87.mass   1.443160648e-25   kg   Steck, Rubidium 87 D Line Data
//! ```
//!
//! i.e. a dotted key, a numeric value, a unit token, and a free-form source
//! note running to the end of the line. `#` starts a comment line. A copy of
//! the default table is compiled into the crate; [`Constants::load`] reads an
//! override from disk.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// Environment variable naming an override constants file.
pub const CONSTANTS_ENV: &str = "VAPORCELL_CONSTANTS";

const BUNDLED: &str = include_str!("../data/rubidium.constants");

/// Every key the models read, with its required unit.
const SCHEMA: &[(&str, &str)] = &[
    ("d2.wavelength", "m"),
    ("rb85.mass", "kg"),
    ("rb85.abundance", "1"),
    ("rb85.nuclear_spin", "1"),
    ("rb85.5s1_2.hyperfine_a", "MHz"),
    ("rb85.5p3_2.hyperfine_a", "MHz"),
    ("rb85.5p3_2.hyperfine_b", "MHz"),
    ("rb85.isotope_shift_d2", "MHz"),
    ("rb85.linewidth_5p3_2", "MHz"),
    ("rb87.mass", "kg"),
    ("rb87.abundance", "1"),
    ("rb87.nuclear_spin", "1"),
    ("rb87.5s1_2.hyperfine_a", "MHz"),
    ("rb87.5p3_2.hyperfine_a", "MHz"),
    ("rb87.5p3_2.hyperfine_b", "MHz"),
    ("rb87.isotope_shift_d2", "MHz"),
    ("rb87.linewidth_5p3_2", "MHz"),
    ("ladder.5d5_2.wavelength", "m"),
    ("ladder.5d5_2.linewidth", "MHz"),
    ("ladder.6p3_2.wavelength", "m"),
    ("ladder.5d5_2.branching_6p", "1"),
    ("vapor.alcock.a", "log10(Pa)"),
    ("vapor.alcock.b", "K"),
    ("vapor.valid_min", "K"),
    ("vapor.valid_max", "K"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEntry {
    pub key: String,
    pub value: f64,
    pub unit: String,
    pub source: String,
}

/// A parsed, schema-checked constants table.
#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    entries: Vec<ConstantEntry>,
}

impl Constants {
    /// The table compiled into the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled constants file is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    /// Loads from `$VAPORCELL_CONSTANTS` when set, the bundled table otherwise.
    pub fn from_env_or_bundled() -> Result<Self> {
        match std::env::var_os(CONSTANTS_ENV) {
            Some(path) if !path.is_empty() => Self::load(path),
            _ => Ok(Self::bundled()),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<ConstantEntry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::ConstantsParse {
                line: line_no,
                message,
            };
            let mut fields = line.split_whitespace();
            let key = fields.next().expect("non-empty line has a first field");
            let value = fields
                .next()
                .ok_or_else(|| err(format!("`{key}` has no value")))?;
            let unit = fields
                .next()
                .ok_or_else(|| err(format!("`{key}` has no unit")))?;
            let source = fields.collect::<Vec<_>>().join(" ");
            if source.is_empty() {
                return Err(err(format!("`{key}` has no source note")));
            }
            let value: f64 = value
                .parse()
                .map_err(|_| err(format!("`{key}`: cannot parse `{value}` as a number")))?;
            if !value.is_finite() {
                return Err(err(format!("`{key}` is not finite")));
            }
            let expected = SCHEMA
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, u)| *u)
                .ok_or_else(|| err(format!("unknown key `{key}`")))?;
            if unit != expected {
                return Err(err(format!(
                    "`{key}` has unit `{unit}`, expected `{expected}`"
                )));
            }
            if entries.iter().any(|e| e.key == key) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            entries.push(ConstantEntry {
                key: key.to_owned(),
                value,
                unit: unit.to_owned(),
                source,
            });
        }
        for (key, _) in SCHEMA {
            if !entries.iter().any(|e| e.key == *key) {
                return Err(Error::Config(format!("constants file is missing `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.entry(key)
            .map(|e| e.value)
            .ok_or_else(|| Error::Config(format!("no constant named `{key}`")))
    }

    pub fn entry(&self, key: &str) -> Option<&ConstantEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn entries(&self) -> &[ConstantEntry] {
        &self.entries
    }

    /// Returns a copy with one value replaced; the unit and source note are kept.
    pub fn with_value(mut self, key: &str, value: f64) -> Result<Self> {
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.key == key)
            .ok_or_else(|| Error::Config(format!("no constant named `{key}`")))?;
        entry.value = value;
        entry.source = format!("override ({})", entry.source);
        Ok(self)
    }
}

impl fmt::Display for Constants {
    /// Renders the table back into the file format, aligned for reading.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = self.entries.iter().map(|e| e.key.len()).max().unwrap_or(0);
        let vw = self
            .entries
            .iter()
            .map(|e| e.value.to_string().len())
            .max()
            .unwrap_or(0);
        let uw = self.entries.iter().map(|e| e.unit.len()).max().unwrap_or(0);
        for e in &self.entries {
            writeln!(
                f,
                "{:kw$}  {:vw$}  {:uw$}  {}",
                e.key,
                e.value.to_string(),
                e.unit,
                e.source
            )?;
        }
        Ok(())
    }
}
