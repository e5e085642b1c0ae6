//! `key=value` option files for `reduce`. Command-line flags take precedence.

use std::collections::BTreeMap;
use std::path::Path;

use h2reduce::{Error, Result};

const KEYS: &[&str] = &[
    "max_iter",
    "grad_tol",
    "delta0",
    "delta_bar",
    "gamma_prime",
    "tcg_max_inner",
    "tcg_kappa",
    "tcg_theta",
    "restarts",
    "hinf_tol",
    "bt_variant",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                message: format!("expected key=value, found `{line}`"),
                line: Some(i + 1),
                field: None,
            })?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    message: format!("unknown key (known: {})", KEYS.join(", ")),
                    line: Some(i + 1),
                    field: Some(key),
                });
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.values
            .get(key)
            .map(|v| {
                v.parse().map_err(|_| Error::Parse {
                    message: format!("invalid value `{v}`"),
                    line: None,
                    field: Some(key.to_string()),
                })
            })
            .transpose()
    }
}
