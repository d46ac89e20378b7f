//! Run directories and their manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thermacro::io::{self, Table};
use thermacro::micro::replica_seed;

use crate::config::{AssertionSpec, ScenarioConfig};
use crate::experiments::Output;

pub const MANIFEST: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub kind: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    /// `replica_seed(master, i)` for each replica `i`.
    pub replicas: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub metric: String,
    pub value: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub experiment: String,
    pub config_hash: String,
    pub seeds: Seeds,
    pub started_at: String,
    pub finished_at: String,
    pub files: Vec<FileEntry>,
    pub metrics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub assertions: Vec<AssertionResult>,
    pub passed: bool,
    pub config: ScenarioConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// A missing metric fails its assertion.
pub fn check(assertions: &[AssertionSpec], metrics: &BTreeMap<String, f64>) -> Vec<AssertionResult> {
    assertions
        .iter()
        .map(|a| {
            let value = metrics.get(&a.metric).copied();
            let passed = value.is_some_and(|v| a.min.is_none_or(|lo| v >= lo) && a.max.is_none_or(|hi| v <= hi));
            AssertionResult { metric: a.metric.clone(), value, min: a.min, max: a.max, passed }
        })
        .collect()
}

/// Writes `tables` into `dir` and returns their manifest entries.
pub fn write_tables(dir: &Path, tables: &[(String, Table)]) -> Result<Vec<FileEntry>> {
    let mut files = Vec::with_capacity(tables.len());
    for (name, t) in tables {
        let text = t.to_csv_string()?;
        fs::write(dir.join(name), &text).with_context(|| format!("writing {name}"))?;
        let kind = serde_json::to_value(t.kind)?.as_str().unwrap_or_default().to_string();
        files.push(FileEntry { file: name.clone(), kind, rows: t.rows.len(), sha256: sha256_hex(text.as_bytes()) });
    }
    Ok(files)
}

/// Runs `cfg` into a fresh directory under `root`. Outputs are written to a
/// hidden staging directory that is renamed only after every file is
/// complete, so a failed run leaves nothing behind.
pub fn execute(cfg: &ScenarioConfig, base: &Path, root: &Path) -> Result<(RunRecord, PathBuf)> {
    let started = Utc::now();
    let canonical = cfg.canonical_json()?;
    let config_hash = sha256_hex(canonical.as_bytes());
    let experiment = cfg.experiment.name().to_string();
    let run_id = format!("{experiment}-{}-{}", started.format("%Y%m%dT%H%M%S%3fZ"), &config_hash[..8]);
    let out = crate::experiments::run(cfg, base)?;
    let Output { tables, metrics, warnings, replicas } = out;

    fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    let final_dir = root.join(&run_id);
    if final_dir.exists() {
        anyhow::bail!("run directory {} already exists", final_dir.display());
    }
    let staging = root.join(format!(".{run_id}.partial"));
    let result = (|| -> Result<RunRecord> {
        fs::create_dir(&staging)?;
        let files = write_tables(&staging, &tables)?;
        let assertions = check(&cfg.assertions, &metrics);
        let record = RunRecord {
            run_id: run_id.clone(),
            experiment,
            config_hash,
            seeds: Seeds { master: cfg.seed, replicas: (0..replicas).map(|i| replica_seed(cfg.seed, i)).collect() },
            started_at: timestamp(started),
            finished_at: timestamp(Utc::now()),
            files,
            metrics,
            warnings,
            passed: assertions.iter().all(|a| a.passed),
            assertions,
            config: cfg.clone(),
        };
        io::write_json(&staging.join(MANIFEST), &record)?;
        fs::rename(&staging, &final_dir)?;
        Ok(record)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    Ok((result?, final_dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assertions_fail_out_of_range_or_without_the_metric() {
        let metrics = BTreeMap::from([("a".to_string(), 1.0)]);
        let spec = |m: &str, min, max| AssertionSpec { metric: m.into(), min, max };
        let res = check(&[spec("a", Some(0.5), Some(1.5)), spec("a", Some(1.1), None), spec("b", None, Some(1.0))], &metrics);
        assert_eq!(res.iter().map(|r| r.passed).collect::<Vec<_>>(), [true, false, false]);
    }

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
