use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The fourteen change-level metrics, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Ns,
    Nd,
    Nf,
    Entropy,
    La,
    Ld,
    Lt,
    Fix,
    Ndev,
    Age,
    Nuc,
    Exp,
    Rexp,
    Sexp,
}

impl Metric {
    pub const COUNT: usize = 14;

    pub const ALL: [Metric; Metric::COUNT] = [
        Metric::Ns,
        Metric::Nd,
        Metric::Nf,
        Metric::Entropy,
        Metric::La,
        Metric::Ld,
        Metric::Lt,
        Metric::Fix,
        Metric::Ndev,
        Metric::Age,
        Metric::Nuc,
        Metric::Exp,
        Metric::Rexp,
        Metric::Sexp,
    ];

    /// The ten features commonly recommended for change-level prediction.
    pub const RECOMMENDED: [Metric; 10] = [
        Metric::Ns,
        Metric::Nf,
        Metric::Entropy,
        Metric::Lt,
        Metric::Fix,
        Metric::Ndev,
        Metric::Age,
        Metric::Nuc,
        Metric::Exp,
        Metric::Sexp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ns => "ns",
            Metric::Nd => "nd",
            Metric::Nf => "nf",
            Metric::Entropy => "entropy",
            Metric::La => "la",
            Metric::Ld => "ld",
            Metric::Lt => "lt",
            Metric::Fix => "fix",
            Metric::Ndev => "ndev",
            Metric::Age => "age",
            Metric::Nuc => "nuc",
            Metric::Exp => "exp",
            Metric::Rexp => "rexp",
            Metric::Sexp => "sexp",
        }
    }

    /// Parses a canonical name or one of the built-in aliases, ignoring case.
    pub fn parse(name: &str) -> Result<Metric> {
        let lower = name.trim().to_ascii_lowercase();
        if let Some(m) = Metric::ALL.iter().find(|m| m.name() == lower) {
            return Ok(*m);
        }
        match ColumnSchema::kamei().resolve(&lower) {
            Some(Column::Metric(m)) => Ok(m),
            _ => Err(Error::UnknownFeature(name.trim().to_string())),
        }
    }

    /// Parses a comma-separated feature list; `all` selects every metric.
    pub fn parse_list(list: &str) -> Result<Vec<Metric>> {
        if list.trim().eq_ignore_ascii_case("all") {
            return Ok(Metric::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in list.split(',').filter(|p| !p.trim().is_empty()) {
            let m = Metric::parse(part)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::UnknownFeature(list.to_string()));
        }
        Ok(out)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::parse(s)
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Metric::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Joins a feature list as `lt,age`.
pub fn feature_label(features: &[Metric]) -> String {
    features
        .iter()
        .map(|m| m.name())
        .collect::<Vec<_>>()
        .join(",")
}

pub const LABEL: &str = "label";

/// What a header cell maps to after canonicalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Metric(Metric),
    Label,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::Metric(m) => m.name(),
            Column::Label => LABEL,
        }
    }
}

/// Canonical column names plus an alias map applied after lower-casing.
///
/// The map must stay injective: each canonical column accepts at most one
/// alias, so a header can never be ambiguous about where a column came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    aliases: BTreeMap<String, Column>,
}

impl ColumnSchema {
    /// Canonical names only, no aliases.
    pub fn canonical() -> Self {
        Self {
            aliases: BTreeMap::new(),
        }
    }

    /// The aliases used by the public Kamei downloads.
    pub fn kamei() -> Self {
        let mut aliases = BTreeMap::new();
        aliases.insert("nm".to_string(), Column::Metric(Metric::Nd));
        aliases.insert("pd".to_string(), Column::Metric(Metric::Age));
        aliases.insert("npt".to_string(), Column::Metric(Metric::Nuc));
        aliases.insert("entrophy".to_string(), Column::Metric(Metric::Entropy));
        aliases.insert("bug".to_string(), Column::Label);
        Self { aliases }
    }

    /// Adds `alias -> canonical`. Fails if the target already has an alias,
    /// if the alias is itself a canonical name, or if the target is unknown.
    pub fn with_alias(mut self, alias: &str, canonical: &str) -> Result<Self> {
        let alias = alias.trim().to_ascii_lowercase();
        let target = match canonical.trim().to_ascii_lowercase().as_str() {
            LABEL => Column::Label,
            other => Column::Metric(
                Metric::ALL
                    .iter()
                    .copied()
                    .find(|m| m.name() == other)
                    .ok_or_else(|| Error::Schema(format!("unknown canonical column '{canonical}'")))?,
            ),
        };
        if alias == LABEL || Metric::ALL.iter().any(|m| m.name() == alias) {
            return Err(Error::Schema(format!("alias '{alias}' shadows a canonical column")));
        }
        if let Some((existing, _)) = self
            .aliases
            .iter()
            .find(|(a, c)| **c == target && **a != alias)
        {
            return Err(Error::Schema(format!(
                "column '{}' already has alias '{existing}'",
                target.name()
            )));
        }
        self.aliases.insert(alias, target);
        Ok(self)
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&str, Column)> {
        self.aliases.iter().map(|(a, c)| (a.as_str(), *c))
    }

    /// Maps a header cell to its canonical column, or `None` for metadata.
    pub fn resolve(&self, header: &str) -> Option<Column> {
        let lower = header.trim().to_ascii_lowercase();
        if lower == LABEL {
            return Some(Column::Label);
        }
        if let Some(m) = Metric::ALL.iter().find(|m| m.name() == lower) {
            return Some(Column::Metric(*m));
        }
        self.aliases.get(&lower).copied()
    }

    /// Display name used in missing-column errors, e.g. `bug/label`.
    pub fn describe(&self, column: Column) -> String {
        match self.aliases.iter().find(|(_, c)| **c == column) {
            Some((alias, _)) => format!("{alias}/{}", column.name()),
            None => column.name().to_string(),
        }
    }
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self::kamei()
    }
}
