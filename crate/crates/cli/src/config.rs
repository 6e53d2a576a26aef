//! Settings resolution: command-line flags over the config file over
//! built-in defaults.
//!
//! The config file is TOML with an optional top-level `seed` and one table
//! per subcommand, e.g.
//!
//! ```toml
//! seed = 7
//! [train]
//! n_dims = 2
//! max_epochs = 50
//! ```

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{invalid, CliResult};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Default)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>, commands: &[&str]) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        for key in table.keys() {
            if key != "seed" && !commands.contains(&key.as_str()) {
                return Err(invalid(format!("config {}: unknown section `{key}`", path.display())));
            }
        }
        let seed = match table.get("seed") {
            None => None,
            Some(toml::Value::Integer(s)) if *s >= 0 => Some(*s as u64),
            Some(other) => return Err(invalid(format!("config seed must be a nonnegative integer, got {other}"))),
        };
        Ok(ConfigFile { seed, table })
    }

    /// Settings for `command`: defaults, then the config section, then any
    /// flag that was given (`overrides` fields that serialize to non-null).
    pub fn resolve<S, O>(&self, command: &str, overrides: &O) -> CliResult<S>
    where
        S: Serialize + DeserializeOwned + Default,
        O: Serialize,
    {
        let base: S = match self.table.get(command) {
            Some(section) => section
                .clone()
                .try_into()
                .map_err(|e| invalid(format!("config section [{command}]: {e}")))?,
            None => S::default(),
        };
        let mut merged = serde_json::to_value(&base)?;
        let flags = serde_json::to_value(overrides)?;
        if let (Value::Object(dst), Value::Object(src)) = (&mut merged, flags) {
            for (k, v) in src {
                if !v.is_null() {
                    dst.insert(k, v);
                }
            }
        }
        serde_json::from_value(merged).map_err(|e| invalid(format!("{command} settings: {e}")))
    }
}

/// Hex sha256 of the canonical (key-sorted, compact) JSON of `value`.
pub fn canonical_hash<T: Serialize>(value: &T) -> CliResult<String> {
    let v = serde_json::to_value(value)?;
    Ok(hex(&Sha256::digest(v.to_string().as_bytes())))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct S {
        a: u32,
        b: String,
    }

    impl Default for S {
        fn default() -> Self {
            S { a: 1, b: "x".into() }
        }
    }

    #[derive(Serialize)]
    struct Flags {
        a: Option<u32>,
        b: Option<String>,
    }

    fn file(text: &str) -> ConfigFile {
        let table: toml::Table = toml::from_str(text).unwrap();
        ConfigFile {
            seed: None,
            table,
        }
    }

    #[test]
    fn precedence() {
        let none = Flags { a: None, b: None };
        let cfg = file("[cmd]\na = 5\n");
        assert_eq!(cfg.resolve::<S, _>("cmd", &none).unwrap(), S { a: 5, b: "x".into() });
        let flag = Flags { a: Some(9), b: None };
        assert_eq!(cfg.resolve::<S, _>("cmd", &flag).unwrap().a, 9);
        assert_eq!(ConfigFile::default().resolve::<S, _>("cmd", &none).unwrap(), S::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let cfg = file("[cmd]\nzzz = 5\n");
        let none = Flags { a: None, b: None };
        assert!(cfg.resolve::<S, _>("cmd", &none).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"x": 1, "y": [1, 2]}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"y": [1, 2], "x": 1}"#).unwrap();
        assert_eq!(canonical_hash(&a).unwrap(), canonical_hash(&b).unwrap());
    }
}
