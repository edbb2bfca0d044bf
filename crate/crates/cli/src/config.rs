//! Plain-text `key=value` config files, with flag-over-file precedence.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Parsed config file. `#` lines and blank lines are ignored; every other
/// line must be `key=value`.
#[derive(Debug, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config {}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Usage(format!("config key {key}={raw:?} is invalid: {e}"))
            }),
        }
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// `on`/`off` switch values (also accepts true/false).
pub fn parse_switch(value: &str, flag: &str) -> Result<bool, CliError> {
    match value {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        other => Err(CliError::Usage(format!(
            "--{flag} expects on|off, got {other:?}"
        ))),
    }
}

/// Comma-separated list parser.
pub fn parse_list<T: FromStr>(value: &str, flag: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(|part| {
            part.trim().parse::<T>().map_err(|e| {
                CliError::Usage(format!("--{flag}: invalid entry {part:?}: {e}"))
            })
        })
        .collect()
}

/// `a..b` inclusive range parser.
pub fn parse_range(value: &str, flag: &str) -> Result<(usize, usize), CliError> {
    let Some((lo, hi)) = value.split_once("..") else {
        return Err(CliError::Usage(format!(
            "--{flag} expects a..b, got {value:?}"
        )));
    };
    let lo = lo.trim().parse::<usize>().map_err(|e| {
        CliError::Usage(format!("--{flag}: bad lower bound {lo:?}: {e}"))
    })?;
    let hi = hi.trim().parse::<usize>().map_err(|e| {
        CliError::Usage(format!("--{flag}: bad upper bound {hi:?}: {e}"))
    })?;
    if lo == 0 || hi < lo {
        return Err(CliError::Usage(format!(
            "--{flag}: range {lo}..{hi} is empty or zero-based"
        )));
    }
    Ok((lo, hi))
}
