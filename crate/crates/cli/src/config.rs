use std::path::Path;

use serde::de::DeserializeOwned;

use crate::CliError;

/// Values from a `--config` TOML file. Keys are looked up in the table
/// named after the command first, then at the top level, and use the long
/// flag names (`grid-points`, `importance-repeats`, ...).
#[derive(Debug, Default)]
pub struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| e.message().to_string())?;
        Ok(Self { table })
    }

    fn lookup(&self, section: &str, key: &str) -> Option<&toml::Value> {
        self.table
            .get(section)
            .and_then(|s| s.as_table())
            .and_then(|s| s.get(key))
            .or_else(|| self.table.get(key).filter(|v| !v.is_table()))
    }

    pub fn get<T: DeserializeOwned>(
        &self,
        section: &str,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        match self.lookup(section, key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))),
        }
    }
}

/// Command-line value when given, else the config file's.
pub fn layered<T: DeserializeOwned>(
    flag: Option<T>,
    config: &FileConfig,
    section: &str,
    key: &str,
) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => config.get(section, key),
    }
}
