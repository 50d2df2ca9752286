//! Run reports and the table of defaults echoed into each of them.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::format::to_json_bytes;

/// Every default the CLI falls back on. Flags override the problem file's
/// options block, which overrides these.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Defaults {
    pub nodes: usize,
    pub tol: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub collision_guard: f64,
    pub integrator_tol: f64,
    pub samples: usize,
    pub t0_homothetic: f64,
    pub t1_homothetic: f64,
    pub lambda_list: Vec<f64>,
    pub scaling_pairs: usize,
    pub scaling_tol: f64,
    pub lagrange_jacobi_tol: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            nodes: 512,
            tol: 1e-8,
            restarts: 4,
            max_iters: 20_000,
            seed: 0,
            collision_guard: 1e-6,
            integrator_tol: 1e-12,
            samples: 1001,
            t0_homothetic: 1.0,
            t1_homothetic: 8.0,
            lambda_list: vec![0.5, 2.0, 4.0],
            scaling_pairs: 3,
            scaling_tol: 2e-3,
            lagrange_jacobi_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckRecord {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

/// Deterministic record of one command. Wall-clock time is printed to
/// stderr instead, so identical inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub argv: Vec<String>,
    pub input_digest: Option<String>,
    pub seed: u64,
    pub defaults: Defaults,
    pub parameters: Value,
    pub outputs: Value,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
}

impl RunReport {
    pub fn to_json(&self) -> Vec<u8> {
        to_json_bytes(self)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
