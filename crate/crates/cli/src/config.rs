//! Layered settings: a flag given on the command line wins over the same key
//! in the command's section of the `--config` TOML file, which wins over the
//! built-in default applied by the command itself.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

/// Parsed `--config` file; each subcommand reads the table named after it.
#[derive(Debug, Default)]
pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table = text.parse::<toml::Table>().with_context(|| format!("parsing {}", path.display()))?;
        Ok(Self { table })
    }

    /// Fills every unset field of `flags` from the `section` table.
    pub fn layer<A: Serialize + DeserializeOwned>(&self, section: &str, flags: A) -> Result<A> {
        let Some(file) = self.table.get(section) else {
            return Ok(flags);
        };
        let Some(file) = file.as_table() else {
            bail!("config section [{section}] is not a table");
        };
        let mut merged = serde_json::to_value(file)?;
        let Value::Object(given) = serde_json::to_value(&flags)? else {
            bail!("settings for {section} are not a record");
        };
        let Value::Object(target) = &mut merged else {
            unreachable!("a TOML table converts to an object");
        };
        if let Some(unknown) = target.keys().find(|k| !given.contains_key(*k)) {
            bail!("unknown setting `{unknown}` in config section [{section}]");
        }
        for (key, value) in given {
            if !value.is_null() {
                target.insert(key, value);
            }
        }
        serde_json::from_value(merged).with_context(|| format!("config section [{section}]"))
    }
}

/// The value of a setting that has no default.
pub fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.with_context(|| format!("missing required setting --{flag} (flag or config file)"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct S {
        a: Option<u32>,
        b: Option<String>,
    }

    fn file(text: &str) -> ConfigFile {
        ConfigFile {
            table: text.parse().unwrap(),
        }
    }

    #[test]
    fn flags_override_file_values() {
        let f = file("[cmd]\na = 1\nb = \"file\"\n");
        let got = f
            .layer(
                "cmd",
                S {
                    a: None,
                    b: Some("flag".into()),
                },
            )
            .unwrap();
        assert_eq!(
            got,
            S {
                a: Some(1),
                b: Some("flag".into())
            }
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let f = file("[cmd]\nc = 1\n");
        assert!(f.layer("cmd", S { a: None, b: None }).is_err());
    }
}
