//! Flat `key = value` text used for scenario and run configuration files.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct KvError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Why a single field could not be set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldError {
    Unknown,
    Invalid(String),
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldError::Unknown => write!(f, "unknown key"),
            FieldError::Invalid(msg) => write!(f, "{msg}"),
        }
    }
}

/// A configuration struct addressable by flat field names.
pub trait KvConfig {
    fn set_field(&mut self, key: &str, value: &str) -> Result<(), FieldError>;

    /// Every field with its current value, in file order.
    fn entries(&self) -> Vec<(&'static str, String)>;

    /// Applies the entries of a parsed file, failing on the first bad line.
    fn apply_entries(&mut self, entries: &[KvEntry]) -> Result<(), KvError> {
        for e in entries {
            self.set_field(&e.key, &e.value).map_err(|err| KvError {
                line: e.line,
                message: match err {
                    FieldError::Unknown => format!("unknown key `{}`", e.key),
                    FieldError::Invalid(msg) => format!("bad value for `{}`: {msg}", e.key),
                },
            })?;
        }
        Ok(())
    }

    fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<KvEntry>, KvError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| KvError {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(KvError {
                line,
                message: format!("malformed key `{key}`"),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(KvError {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        out.push(KvEntry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn parse_value<T: FromStr>(value: &str) -> Result<T, FieldError>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| FieldError::Invalid(format!("`{value}`: {e}")))
}

pub(crate) fn parse_bool(value: &str) -> Result<bool, FieldError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(FieldError::Invalid(format!("`{other}` is not a boolean"))),
    }
}
