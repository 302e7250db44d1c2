use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

/// Recursively overlays `top` onto `base`; tables merge, everything else is replaced.
pub fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("E_IO: cannot read {}", path.display()))?;
    text.parse::<Table>()
        .map_err(|e| anyhow::anyhow!("E_SPEC: {}: {}", path.display(), e.message().trim()))
}

/// Values built from flags, with the config file (if any) taking precedence.
pub fn resolve<T: Serialize + DeserializeOwned>(from_flags: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(toml::from_str(&toml::to_string(from_flags)?)?);
    };
    let mut table = Table::try_from(from_flags)?;
    merge(&mut table, read_table(path)?);
    T::deserialize(table).map_err(|e| anyhow::anyhow!("E_SPEC: {}: {}", path.display(), e.message().trim()))
}
