//! CSV ingestion, run manifests, and result emission.
//!
//! File contracts: calibration CSV has columns `score,weight`, test CSV
//! `score,weight[,null_flag]` (flag 0/1), header row required. Output is
//! UTF-8 with LF line endings, `.` decimal separator, and
//! shortest-round-trip float formatting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Deserialize)]
struct CalibRow {
    score: f64,
    weight: f64,
}

#[derive(Debug, Deserialize)]
struct TestRow {
    score: f64,
    weight: f64,
    null_flag: Option<u8>,
}

pub struct CalibFile {
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
}

pub struct TestFile {
    pub scores: Vec<f64>,
    pub weights: Vec<f64>,
    pub null_flags: Option<Vec<bool>>,
}

fn usage(path: &Path, msg: String) -> CliError {
    CliError::Usage(format!("{}: {msg}", path.display()))
}

fn check_unit(path: &Path, row: usize, score: f64, weight: f64) -> Result<(), CliError> {
    if !score.is_finite() {
        return Err(usage(path, format!("row {row}: score must be finite (got {score})")));
    }
    if !weight.is_finite() || weight <= 0.0 {
        return Err(usage(
            path,
            format!("row {row}: weight must be finite and > 0 (got {weight})"),
        ));
    }
    Ok(())
}

pub fn read_calibration(path: &Path) -> Result<CalibFile, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| usage(path, format!("cannot open: {e}")))?;
    let mut scores = Vec::new();
    let mut weights = Vec::new();
    for (i, record) in reader.deserialize::<CalibRow>().enumerate() {
        let row = i + 1;
        let rec = record.map_err(|e| usage(path, format!("row {row}: {e}")))?;
        check_unit(path, row, rec.score, rec.weight)?;
        scores.push(rec.score);
        weights.push(rec.weight);
    }
    Ok(CalibFile { scores, weights })
}

pub fn read_test(path: &Path) -> Result<TestFile, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| usage(path, format!("cannot open: {e}")))?;
    let mut scores = Vec::new();
    let mut weights = Vec::new();
    let mut flags = Vec::new();
    let mut flagged_rows = 0usize;
    for (i, record) in reader.deserialize::<TestRow>().enumerate() {
        let row = i + 1;
        let rec = record.map_err(|e| usage(path, format!("row {row}: {e}")))?;
        check_unit(path, row, rec.score, rec.weight)?;
        scores.push(rec.score);
        weights.push(rec.weight);
        match rec.null_flag {
            Some(0) => flags.push(false),
            Some(1) => flags.push(true),
            Some(v) => {
                return Err(usage(path, format!("row {row}: null_flag must be 0 or 1 (got {v})")))
            }
            None => flags.push(false),
        }
        if rec.null_flag.is_some() {
            flagged_rows += 1;
        }
    }
    let null_flags = if flagged_rows == 0 {
        None
    } else if flagged_rows == scores.len() {
        Some(flags)
    } else {
        return Err(usage(
            path,
            "null_flag must be present for all rows or none".to_string(),
        ));
    };
    Ok(TestFile {
        scores,
        weights,
        null_flags,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Deterministic run provenance embedded in every result file; the
/// accompanying `*.manifest.json` adds the wall-clock duration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
}

impl Manifest {
    pub fn new(
        command: &str,
        seed: Option<u64>,
        config: serde_json::Value,
        input_paths: &[&Path],
    ) -> Result<Self, CliError> {
        let mut inputs = Vec::with_capacity(input_paths.len());
        for path in input_paths {
            let bytes = fs::read(path)
                .map_err(|e| CliError::Usage(format!("{}: cannot read: {e}", path.display())))?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            inputs.push(InputDigest {
                path: path.display().to_string(),
                sha256: format!("{:x}", hasher.finalize()),
            });
        }
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs,
        })
    }
}

#[derive(Debug, Serialize)]
struct TimedManifest<'a> {
    #[serde(flatten)]
    manifest: &'a Manifest,
    duration_seconds: f64,
}

/// Path of the timing manifest that accompanies `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Writes the timing sidecar for an output file.
pub fn write_sidecar(out: &Path, manifest: &Manifest, duration_seconds: f64) -> Result<(), CliError> {
    let timed = TimedManifest {
        manifest,
        duration_seconds,
    };
    let body = serde_json::to_string_pretty(&timed).map_err(internal)? + "\n";
    fs::write(manifest_path(out), body)
        .map_err(|e| CliError::Internal(format!("cannot write manifest: {e}")))
}

/// Serializes a result (with its embedded manifest) to `out`, or stdout
/// when no path is given.
pub fn emit_json<T: Serialize>(
    value: &T,
    out: Option<&Path>,
    manifest: &Manifest,
    duration_seconds: f64,
) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value).map_err(internal)? + "\n";
    match out {
        Some(path) => {
            fs::write(path, body)
                .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
            write_sidecar(path, manifest, duration_seconds)
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

pub fn internal<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Internal(e.to_string())
}
