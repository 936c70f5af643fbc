//! TOML map definition files.
//!
//! ```toml
//! schema_version = 1
//! name = "ulam"
//!
//! [[branch]]
//! left = 0.0
//! right = 0.5
//! formula = { kind = "logistic", r = 4.0 }
//!
//! [[branch]]
//! left = 0.5
//! right = 1.0
//! formula = { kind = "logistic", r = 4.0 }
//!
//! [[critical]]
//! location = 0.5
//! side = "minus"
//! order = 2.0
//! ```
//!
//! Formula kinds: `affine` (`intercept`, `slope`), `logistic` (`r`) and
//! `power_sum` (`terms = [{ coef, center, exponent }, ...]`).

use serde::Deserialize;

use super::{Branch, Formula, OneSidedCriticalPoint, PiecewiseMap, Side};
use crate::error::{Error, Result};

pub const MAP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    schema_version: u32,
    name: String,
    #[serde(rename = "branch")]
    branches: Vec<BranchEntry>,
    #[serde(rename = "critical", default)]
    critical: Vec<CriticalEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchEntry {
    left: f64,
    right: f64,
    formula: Formula,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CriticalEntry {
    location: f64,
    side: Side,
    order: f64,
}

/// 1-based line of a byte offset.
pub fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Convert a TOML error into [`Error::Parse`] carrying the line number.
pub fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let line = err.span().map(|s| line_of(text, s.start)).unwrap_or(0);
    Error::Parse { line, message: err.message().to_string() }
}

pub fn parse_map(text: &str) -> Result<PiecewiseMap> {
    let file: MapFile = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    if file.schema_version != MAP_SCHEMA_VERSION {
        let line = text.lines().position(|l| l.trim_start().starts_with("schema_version")).map_or(0, |i| i + 1);
        return Err(Error::Parse {
            line,
            message: format!("unsupported schema_version {} (expected {MAP_SCHEMA_VERSION})", file.schema_version),
        });
    }
    let branches = file.branches.into_iter().map(|b| Branch::new(b.left, b.right, b.formula)).collect();
    let critical = file
        .critical
        .into_iter()
        .map(|c| OneSidedCriticalPoint::new(c.location, c.side, c.order))
        .collect::<Result<Vec<_>>>()?;
    PiecewiseMap::new(file.name, branches, critical)
}

pub fn load_map(path: &std::path::Path) -> Result<PiecewiseMap> {
    parse_map(&std::fs::read_to_string(path)?)
}
