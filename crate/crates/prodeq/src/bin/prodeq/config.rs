//! Flat key=value configuration with manifest round-tripping.
//!
//! Precedence is flags > config file (or manifest) > defaults. Every field
//! a command resolves is written back to the map in canonical form, so the
//! manifest always carries the complete effective configuration and can be
//! re-executed verbatim.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use prodeq::manifest::RunManifest;

use crate::CliError;

pub struct Resolver {
    map: BTreeMap<String, String>,
    allowed: &'static [&'static str],
}

impl Resolver {
    pub fn new(
        subcommand: &str,
        allowed: &'static [&'static str],
        config: Option<&Path>,
        from_manifest: Option<&Path>,
    ) -> Result<Self, CliError> {
        let mut resolver = Self {
            map: BTreeMap::new(),
            allowed,
        };
        match (config, from_manifest) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "--config and --from-manifest are mutually exclusive".into(),
                ))
            }
            (Some(path), None) => resolver.load_config_file(path)?,
            (None, Some(path)) => resolver.load_manifest(path, subcommand)?,
            (None, None) => {}
        }
        Ok(resolver)
    }

    fn check_key(&self, key: &str, source: &str) -> Result<(), CliError> {
        if self.allowed.contains(&key) {
            Ok(())
        } else {
            Err(CliError::Data(format!(
                "unknown configuration key '{key}' in {source} (expected one of {})",
                self.allowed.join(", ")
            )))
        }
    }

    fn load_config_file(&mut self, path: &Path) -> Result<(), CliError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, line) in body.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Data(format!(
                    "{}:{}: expected key=value, got '{line}'",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            self.check_key(&key, "config file")?;
            self.map.insert(key, value.trim().to_string());
        }
        Ok(())
    }

    fn load_manifest(&mut self, path: &Path, subcommand: &str) -> Result<(), CliError> {
        let manifest = RunManifest::read_from(path)
            .map_err(|e| CliError::Data(format!("cannot read manifest {}: {e}", path.display())))?;
        if manifest.subcommand != subcommand {
            return Err(CliError::Data(format!(
                "manifest {} was written by '{}', not '{subcommand}'",
                path.display(),
                manifest.subcommand
            )));
        }
        for (key, value) in manifest.config {
            self.check_key(&key, "manifest")?;
            self.map.insert(key, value);
        }
        Ok(())
    }

    /// Flag values override whatever the file provided.
    pub fn set_flag<T: Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.map.insert(key.into(), v.to_string());
        }
    }

    /// A value that must come from somewhere; reports the flag name when
    /// missing.
    pub fn required<T>(&mut self, key: &str, flag: &str) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.map.get(key) {
            Some(raw) => self.parse_into(key, raw.clone()),
            None => Err(CliError::Usage(format!(
                "missing required value: pass {flag} (or set '{key}' in a config file)"
            ))),
        }
    }

    pub fn field<T>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.map.get(key) {
            Some(raw) => self.parse_into(key, raw.clone()),
            None => {
                self.map.insert(key.into(), default.to_string());
                Ok(default)
            }
        }
    }

    /// Unsigned counts, accepting scientific notation like `1e7`.
    pub fn count_field(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.map.get(key).cloned() {
            Some(raw) => {
                let v = parse_count(&raw)
                    .map_err(|e| CliError::Data(format!("bad value for '{key}': {e}")))?;
                self.map.insert(key.into(), v.to_string());
                Ok(v)
            }
            None => {
                self.map.insert(key.into(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn count_field_with(
        &mut self,
        key: &str,
        default: impl FnOnce() -> u64,
    ) -> Result<u64, CliError> {
        if self.map.contains_key(key) {
            self.count_field(key, 0)
        } else {
            let v = default();
            self.map.insert(key.into(), v.to_string());
            Ok(v)
        }
    }

    pub fn required_count(&mut self, key: &str, flag: &str) -> Result<u64, CliError> {
        match self.map.get(key).cloned() {
            Some(raw) => {
                let v = parse_count(&raw)
                    .map_err(|e| CliError::Data(format!("bad value for '{key}': {e}")))?;
                self.map.insert(key.into(), v.to_string());
                Ok(v)
            }
            None => Err(CliError::Usage(format!(
                "missing required value: pass {flag} (or set '{key}' in a config file)"
            ))),
        }
    }

    pub fn optional<T>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.map.get(key) {
            Some(raw) => self.parse_into(key, raw.clone()).map(Some),
            None => Ok(None),
        }
    }

    pub fn string_field(&mut self, key: &str, default: &str) -> String {
        match self.map.get(key) {
            Some(v) => v.clone(),
            None => {
                self.map.insert(key.into(), default.to_string());
                default.to_string()
            }
        }
    }

    pub fn bool_field(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        self.field(key, default)
    }

    pub fn path_field(&mut self, key: &str, default: &str) -> PathBuf {
        PathBuf::from(self.string_field(key, default))
    }

    pub fn required_path(&mut self, key: &str, flag: &str) -> Result<PathBuf, CliError> {
        match self.map.get(key) {
            Some(v) => Ok(PathBuf::from(v)),
            None => Err(CliError::Usage(format!(
                "missing required value: pass {flag} (or set '{key}' in a config file)"
            ))),
        }
    }

    /// Comma-separated floats, canonicalized.
    pub fn f64_list_field(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let raw = match self.map.get(key) {
            Some(v) => v.clone(),
            None => {
                let joined = join_f64(default);
                self.map.insert(key.into(), joined);
                return Ok(default.to_vec());
            }
        };
        let mut out = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            out.push(
                part.parse::<f64>()
                    .map_err(|e| CliError::Data(format!("bad value '{part}' in '{key}': {e}")))?,
            );
        }
        self.map.insert(key.into(), join_f64(&out));
        Ok(out)
    }

    fn parse_into<T>(&mut self, key: &str, raw: String) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v: T = raw
            .trim()
            .parse()
            .map_err(|e| CliError::Data(format!("bad value '{raw}' for '{key}': {e}")))?;
        self.map.insert(key.into(), v.to_string());
        Ok(v)
    }

    pub fn into_map(self) -> BTreeMap<String, String> {
        self.map
    }
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `u64` that also accepts integral scientific notation (`1e7`).
pub fn parse_count(raw: &str) -> Result<u64, String> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = raw
        .parse()
        .map_err(|_| format!("'{raw}' is not a non-negative integer"))?;
    if !f.is_finite() || f < 0.0 || f.fract() != 0.0 || f > 2f64.powi(63) {
        return Err(format!(
            "'{raw}' is not a representable non-negative integer"
        ));
    }
    Ok(f as u64)
}
