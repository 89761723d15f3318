//! Run-directory files: manifest, traces and tables.
//!
//! Trace files are CSV with the header
//! `iter,objective,proposal_objective,temperature,kind,accepted,inside,kl,mass`,
//! one row per iteration, row 0 being the center. Empty fields mean "not
//! computed". Floats use the shortest representation that round-trips.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use netrobust_core::TraceRecord;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TRACE_HEADER: &str = "iter,objective,proposal_objective,temperature,kind,accepted,inside,kl,mass";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub method: u8,
    pub features: Vec<FeatureSeeds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeeds {
    pub feature: String,
    pub center_seed: u64,
    pub brute_force_seed: u64,
    pub search_seed: u64,
    pub replicate_seeds: Vec<u64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling and renames, so a file that exists is
/// complete.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Option<Manifest>, CliError> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Config(format!("unreadable manifest {}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::io(path, e)),
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    write_atomic(path, &text)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_csv(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 96);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.objective,
            opt(r.proposal_objective),
            r.temperature,
            r.kind.unwrap_or(""),
            r.accepted,
            r.inside,
            opt(r.kl),
            r.mass
        );
    }
    out
}

/// The columns of a persisted trace that the tables are computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredTrace {
    pub objectives: Vec<f64>,
    pub proposal_objectives: Vec<Option<f64>>,
}

impl StoredTrace {
    pub fn center_objective(&self) -> f64 {
        self.objectives[0]
    }

    pub fn best_objective(&self) -> f64 {
        self.objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Center followed by every inside-ball proposal that was evaluated.
    pub fn visited_objectives(&self) -> Vec<f64> {
        let mut out = vec![self.objectives[0]];
        out.extend(self.proposal_objectives.iter().skip(1).flatten());
        out
    }
}

fn parse_opt(field: &str) -> Option<Option<f64>> {
    if field.is_empty() {
        Some(None)
    } else {
        field.parse().ok().map(Some)
    }
}

/// Parses a trace file; `None` if it is malformed or has the wrong length.
pub fn parse_trace(text: &str, expected_rows: usize) -> Option<StoredTrace> {
    let mut lines = text.lines();
    if lines.next()? != TRACE_HEADER {
        return None;
    }
    let mut objectives = Vec::with_capacity(expected_rows);
    let mut proposal_objectives = Vec::with_capacity(expected_rows);
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 || fields[0].parse::<usize>().ok()? != i {
            return None;
        }
        objectives.push(fields[1].parse().ok()?);
        proposal_objectives.push(parse_opt(fields[2])?);
    }
    (objectives.len() == expected_rows).then_some(StoredTrace { objectives, proposal_objectives })
}

pub fn load_trace(path: &Path, expected_rows: usize) -> Option<StoredTrace> {
    std::fs::read_to_string(path).ok().and_then(|t| parse_trace(&t, expected_rows))
}

pub fn values_text(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 24);
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn parse_values(text: &str) -> Option<Vec<f64>> {
    text.lines().map(|l| l.parse().ok()).collect()
}

pub fn trace_path(dir: &Path, feature: &str, replicate: usize) -> PathBuf {
    dir.join("traces").join(format!("{feature}_rep{replicate:04}.csv"))
}

/// Sample mean and unbiased variance; variance is 0 for a single value.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
