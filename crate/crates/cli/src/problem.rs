//! Problem files: a mass system, named configurations, optional named paths
//! and an optional options block.

use std::collections::BTreeMap;
use std::fmt;

use ftm_core::{ConfigurationF64, DiscretePathF64, MassSystemF64};
use serde::{Deserialize, Serialize};

use crate::format::to_json_bytes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dim: usize,
    pub masses: Vec<f64>,
    #[serde(default)]
    pub configurations: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub paths: BTreeMap<String, PathRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<ProblemOptions>,
}

/// A discrete path: one `N x d` array per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub nodes: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_guard: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemError(pub String);

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid problem file: {}", self.0)
    }
}

impl std::error::Error for ProblemError {}

fn err(msg: impl Into<String>) -> ProblemError {
    ProblemError(msg.into())
}

/// Token starting at 1-based `line`/`column`, for error messages.
fn token_at(text: &str, line: usize, column: usize) -> Option<&str> {
    let l = text.lines().nth(line.checked_sub(1)?)?;
    let rest = l.get(column.saturating_sub(1)..)?;
    let end = rest
        .find(|c: char| c == ',' || c == ']' || c == '}' || c.is_whitespace())
        .unwrap_or(rest.len());
    Some(&rest[..end])
}

pub fn parse_problem(bytes: &[u8]) -> Result<ProblemFile, ProblemError> {
    let text = std::str::from_utf8(bytes).map_err(|e| err(format!("not UTF-8: {e}")))?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let p: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path == "." { String::new() } else { format!("field `{path}`: ") };
        let tok = token_at(text, inner.line(), inner.column()).unwrap_or("");
        let lower = tok.trim_start_matches('-').to_ascii_lowercase();
        if lower.starts_with("nan") || lower.starts_with("inf") {
            err(format!(
                "{at}non-finite number `{tok}` at line {} column {}",
                inner.line(),
                inner.column()
            ))
        } else {
            err(format!("{at}{inner}"))
        }
    })?;
    p.validate()?;
    Ok(p)
}

pub fn serialize_problem(p: &ProblemFile) -> Vec<u8> {
    to_json_bytes(p)
}

fn check_rows(what: &str, rows: &[Vec<f64>], n: usize, d: usize) -> Result<(), ProblemError> {
    if rows.len() != n {
        return Err(err(format!("{what}: expected {n} bodies, found {}", rows.len())));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(err(format!(
                "{what}: body {i} has {} coordinates, expected {d}",
                r.len()
            )));
        }
        if let Some(k) = r.iter().position(|v| !v.is_finite()) {
            return Err(err(format!("{what}: body {i} coordinate {k} is not finite")));
        }
    }
    Ok(())
}

impl ProblemFile {
    pub fn validate(&self) -> Result<(), ProblemError> {
        self.system()?;
        let (n, d) = (self.masses.len(), self.dim);
        for (name, rows) in &self.configurations {
            check_rows(&format!("configuration `{name}`"), rows, n, d)?;
        }
        for (name, path) in &self.paths {
            if path.times.len() != path.nodes.len() {
                return Err(err(format!(
                    "path `{name}`: {} times but {} nodes",
                    path.times.len(),
                    path.nodes.len()
                )));
            }
            for (k, rows) in path.nodes.iter().enumerate() {
                check_rows(&format!("path `{name}` node {k}"), rows, n, d)?;
            }
            self.path(name)?;
        }
        if let Some(o) = &self.options {
            for (key, v) in [("tol", o.tol), ("collision_guard", o.collision_guard)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(err(format!("options.{key} must be positive, got {v}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<MassSystemF64, ProblemError> {
        MassSystemF64::new(self.masses.clone(), self.dim).map_err(|e| err(e.to_string()))
    }

    pub fn configuration(&self, name: &str) -> Result<ConfigurationF64, ProblemError> {
        let rows = self.configurations.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.configurations.keys().map(String::as_str).collect();
            err(format!(
                "no configuration named `{name}` (available: {})",
                known.join(", ")
            ))
        })?;
        ConfigurationF64::from_rows(rows).map_err(|e| err(format!("configuration `{name}`: {e}")))
    }

    pub fn path(&self, name: &str) -> Result<DiscretePathF64, ProblemError> {
        let rec = self.paths.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.paths.keys().map(String::as_str).collect();
            err(format!("no path named `{name}` (available: {})", known.join(", ")))
        })?;
        let nodes = rec
            .nodes
            .iter()
            .map(|rows| ConfigurationF64::from_rows(rows))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| err(format!("path `{name}`: {e}")))?;
        DiscretePathF64::new(rec.times.clone(), nodes).map_err(|e| err(format!("path `{name}`: {e}")))
    }
}

pub fn rows_of(c: &ConfigurationF64) -> Vec<Vec<f64>> {
    c.rows().map(<[f64]>::to_vec).collect()
}

pub fn path_record(p: &DiscretePathF64) -> PathRecord {
    PathRecord {
        times: p.times().to_vec(),
        nodes: p.nodes().iter().map(rows_of).collect(),
    }
}
