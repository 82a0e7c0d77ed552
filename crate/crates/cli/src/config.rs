//! Key=value configuration files with `[section]` headers.
//!
//! Sections are subcommand names; the `[global]` section applies to every
//! subcommand. Command-line flags override file values. Unknown keys and
//! malformed lines are hard errors carrying the line number.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    /// (section, key) -> (value, line number)
    entries: HashMap<(String, String), (String, usize)>,
}

impl FileConfig {
    pub fn empty() -> Self {
        FileConfig::default()
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = HashMap::new();
        let mut section = "global".to_string();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config line {line_no}: expected `key = value`, got `{raw}`"
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::usage(format!("config line {line_no}: empty key")));
            }
            entries.insert((section.clone(), key), (value.trim().to_string(), line_no));
        }
        Ok(FileConfig { entries })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .or_else(|| self.entries.get(&("global".to_string(), key.to_string())))
    }

    /// Typed lookup; the subcommand section shadows `[global]`.
    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|e| {
                CliError::usage(format!(
                    "config line {line}: bad value `{v}` for `{key}`: {e}"
                ))
            }),
        }
    }

    /// Rejects keys outside the allowed sets, naming the offending line.
    pub fn validate_keys(
        &self,
        section: &str,
        allowed: &[&str],
        allowed_global: &[&str],
    ) -> Result<(), CliError> {
        let mut offenders: Vec<(usize, String, String)> = Vec::new();
        for ((sec, key), (_, line)) in &self.entries {
            // other sections are ignored by this subcommand
            let relevant = sec == "global" || sec == section;
            let ok = !relevant
                || allowed.contains(&key.as_str())
                || allowed_global.contains(&key.as_str());
            if !ok {
                offenders.push((*line, sec.clone(), key.clone()));
            }
        }
        offenders.sort();
        if let Some((line, sec, key)) = offenders.first() {
            return Err(CliError::usage(format!(
                "config line {line}: unknown key `{key}` in section [{sec}]"
            )));
        }
        Ok(())
    }
}

/// FNV-1a digest of the resolved configuration, embedded in every output.
pub fn config_digest(parts: &[String]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        h ^= 0x0a;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{h:016x}")
}

/// Parses a comma-separated list of floats (for ladders and grids).
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| CliError::usage(format!("bad number `{p}` in list: {e}")))
        })
        .collect()
}
