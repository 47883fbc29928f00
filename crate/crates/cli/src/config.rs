//! Line-oriented `key = value` configuration with `[section]` headers and
//! unit-suffixed numbers.
//!
//! Every key a command reads is marked as used; `finish` rejects keys that
//! no command asked for, so typos are reported with their line number.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: file not found")]
    NotFound { path: String },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("line {line}: [{section}] {key}: {message}")]
    Field {
        line: usize,
        section: String,
        key: String,
        message: String,
    },

    #[error("[{section}] {key}: {message}")]
    Missing {
        section: String,
        key: String,
        message: String,
    },
}

/// Physical dimension of a numeric field and the unit suffixes it accepts,
/// with the factor to the internal unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Internal unit nm.
    Wavelength,
    /// Internal unit fs.
    Time,
    /// Internal unit s.
    Seconds,
    /// Internal unit µm.
    Micron,
    /// Internal unit mm.
    Millimetre,
    /// Internal unit degrees.
    Angle,
    /// Internal unit rad/fs.
    AngularFrequency,
    /// Internal unit fs².
    Dispersion,
    /// Internal unit fs²/mm.
    DispersionPerShift,
    /// Internal unit W.
    Power,
    /// Internal unit Hz.
    Rate,
    /// Internal unit m²·s.
    AreaTime,
    /// Internal unit cm⁴·s.
    CrossSection,
    Pixels,
    Dimensionless,
}

impl Dim {
    fn units(&self) -> &'static [(&'static str, f64)] {
        match self {
            Dim::Wavelength => &[("nm", 1.0), ("pm", 1e-3), ("um", 1e3), ("µm", 1e3)],
            Dim::Time => &[("fs", 1.0), ("as", 1e-3), ("ps", 1e3), ("ns", 1e6)],
            Dim::Seconds => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("min", 60.0)],
            Dim::Micron => &[("um", 1.0), ("µm", 1.0), ("nm", 1e-3), ("mm", 1e3)],
            Dim::Millimetre => &[("mm", 1.0), ("um", 1e-3), ("µm", 1e-3), ("cm", 10.0), ("m", 1e3)],
            Dim::Angle => &[("deg", 1.0), ("rad", 180.0 / std::f64::consts::PI)],
            Dim::AngularFrequency => &[("rad/fs", 1.0), ("rad/ps", 1e-3)],
            Dim::Dispersion => &[("fs^2", 1.0), ("fs2", 1.0), ("ps^2", 1e6)],
            Dim::DispersionPerShift => &[("fs^2/mm", 1.0), ("fs2/mm", 1.0), ("fs^2/um", 1e3)],
            Dim::Power => &[("W", 1.0), ("mW", 1e-3), ("uW", 1e-6), ("µW", 1e-6), ("nW", 1e-9), ("pW", 1e-12)],
            Dim::Rate => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dim::AreaTime => &[("m^2 s", 1.0), ("cm^2 s", 1e-4)],
            Dim::CrossSection => &[("cm^4 s", 1.0)],
            Dim::Pixels => &[("px", 1.0)],
            Dim::Dimensionless => &[("1", 1.0)],
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<(String, String), Entry>,
    sections: BTreeMap<String, usize>,
    used: RefCell<BTreeSet<(String, String)>>,
    /// SHA-256 of the raw file contents (empty input for defaults).
    pub sha256: String,
    /// Directory relative to which file references resolve.
    pub base_dir: std::path::PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ConfigError::NotFound {
                path: path.display().to_string(),
            },
            _ => ConfigError::Io {
                path: path.display().to_string(),
                source: e,
            },
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config {
            sha256: crate::output::sha256_hex(text.as_bytes()),
            ..Config::default()
        };
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("unterminated section header '{content}'"),
                })?;
                section = name.trim().to_string();
                if section.is_empty() {
                    return Err(ConfigError::Syntax {
                        line,
                        message: "empty section name".into(),
                    });
                }
                if cfg.sections.insert(section.clone(), line).is_some() {
                    return Err(ConfigError::Syntax {
                        line,
                        message: format!("section [{section}] appears twice"),
                    });
                }
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "missing key before '='".into(),
                });
            }
            if section.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("key '{key}' appears before any [section]"),
                });
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(previous) = cfg.entries.insert((section.clone(), key.clone()), entry) {
                return Err(ConfigError::Field {
                    line,
                    section,
                    key,
                    message: format!("duplicate key (first set on line {})", previous.line),
                });
            }
        }
        Ok(cfg)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        let id = (section.to_string(), key.to_string());
        let entry = self.entries.get(&id)?;
        self.used.borrow_mut().insert(id);
        Some(entry)
    }

    fn field_error(&self, section: &str, key: &str, line: usize, message: String) -> ConfigError {
        ConfigError::Field {
            line,
            section: section.into(),
            key: key.into(),
            message,
        }
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.entries.contains_key(&(section.to_string(), key.to_string()))
    }

    /// Numeric value converted to the internal unit of `dim`. A bare number
    /// is taken to be in the internal unit already.
    pub fn f64(&self, section: &str, key: &str, dim: Dim) -> Result<Option<f64>, ConfigError> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(None);
        };
        let text = entry.value.as_str();
        let split = number_prefix_len(text);
        let (number, unit) = text.split_at(split);
        let value: f64 = number.parse().map_err(|_| {
            self.field_error(section, key, entry.line, format!("'{text}' is not a number"))
        })?;
        let unit = unit.trim();
        let factor = if unit.is_empty() {
            1.0
        } else {
            dim.units()
                .iter()
                .find(|(u, _)| *u == unit)
                .map(|(_, f)| *f)
                .ok_or_else(|| {
                    let expected: Vec<&str> = dim.units().iter().map(|(u, _)| *u).collect();
                    self.field_error(
                        section,
                        key,
                        entry.line,
                        format!("unknown unit '{unit}' (expected one of {})", expected.join(", ")),
                    )
                })?
        };
        let out = value * factor;
        if !out.is_finite() {
            return Err(self.field_error(section, key, entry.line, format!("'{text}' is not finite")));
        }
        Ok(Some(out))
    }

    pub fn f64_or(&self, section: &str, key: &str, dim: Dim, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(section, key, dim)?.unwrap_or(default))
    }

    pub fn require_f64(&self, section: &str, key: &str, dim: Dim) -> Result<f64, ConfigError> {
        self.f64(section, key, dim)?.ok_or_else(|| ConfigError::Missing {
            section: section.into(),
            key: key.into(),
            message: "required".into(),
        })
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(None);
        };
        entry.value.parse().map(Some).map_err(|_| {
            self.field_error(
                section,
                key,
                entry.line,
                format!("'{}' is not a non-negative integer", entry.value),
            )
        })
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.usize(section, key)?.unwrap_or(default))
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(None);
        };
        entry.value.parse().map(Some).map_err(|_| {
            self.field_error(section, key, entry.line, format!("'{}' is not an unsigned integer", entry.value))
        })
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool, ConfigError> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(default);
        };
        match entry.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(self.field_error(section, key, entry.line, format!("'{other}' is not a boolean"))),
        }
    }

    pub fn string(&self, section: &str, key: &str) -> Option<String> {
        self.entry(section, key).map(|e| e.value.clone())
    }

    /// One of `choices`, or `default` when the key is absent.
    pub fn choice<'a>(&self, section: &str, key: &str, choices: &[&'a str], default: &'a str) -> Result<&'a str, ConfigError> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(default);
        };
        choices
            .iter()
            .find(|c| c.eq_ignore_ascii_case(&entry.value))
            .copied()
            .ok_or_else(|| {
                self.field_error(
                    section,
                    key,
                    entry.line,
                    format!("'{}' is not one of {}", entry.value, choices.join(", ")),
                )
            })
    }

    /// Comma- or space-separated list of integers.
    pub fn usize_list(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(None);
        };
        entry
            .value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| self.field_error(section, key, entry.line, format!("'{s}' is not an integer")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Line of a key, for diagnostics raised after parsing.
    pub fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.entries.get(&(section.to_string(), key.to_string())).map(|e| e.line)
    }

    /// Reject keys that no command read.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        if let Some(((section, key), entry)) = self.entries.iter().find(|(id, _)| !used.contains(*id)) {
            return Err(ConfigError::Field {
                line: entry.line,
                section: section.clone(),
                key: key.clone(),
                message: "unknown key for this experiment".into(),
            });
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    let trimmed = line.trim_start();
    if trimmed.starts_with('#') || trimmed.starts_with(';') {
        return "";
    }
    match line.find(" #") {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Length of the leading floating-point literal in `text`.
fn number_prefix_len(text: &str) -> usize {
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut seen_digit = false;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
        seen_digit |= bytes[i].is_ascii_digit();
        i += 1;
    }
    if seen_digit && i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    if seen_digit {
        i
    } else {
        text.len()
    }
}
