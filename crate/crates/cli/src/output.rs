//! Record streams, summary table and run manifest.
//!
//! Every record is one JSON object per line with keys in lexicographic
//! order. Each carries `config_hash`, `seed` and `version` besides its own
//! fields; the first line of `records.jsonl` is a `header` record holding
//! the canonical configuration. `manifest.jsonl` starts with a `run` line
//! (hash, seed, version, start and end as Unix seconds) followed by one
//! `file` line per output with its SHA-256.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig, Kind};
use crate::error::CliError;

pub const VERSION: &str = concat!("trapwalk ", env!("CARGO_PKG_VERSION"));
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// What an experiment hands back for writing.
#[derive(Debug, Default)]
pub struct Outcome {
    pub records: Vec<Value>,
    /// `(label, value)` rows of the summary table.
    pub summary: Vec<(String, String)>,
    /// Extra artifacts as `(file name, contents)`.
    pub files: Vec<(String, String)>,
    /// Replaces the summary on standard output when no directory is given.
    pub stdout: Option<String>,
}

impl Outcome {
    pub fn row(&mut self, label: &str, value: impl ToString) {
        self.summary.push((label.to_string(), value.to_string()));
    }

    pub fn record(&mut self, kind: &str, fields: Value) {
        let mut obj = match fields {
            Value::Object(m) => m,
            other => Map::from_iter([("value".to_string(), other)]),
        };
        obj.insert("record".into(), Value::String(kind.into()));
        self.records.push(Value::Object(obj));
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn stamp(mut v: Value, cfg: &ExperimentConfig, hash: &str) -> String {
    if let Value::Object(m) = &mut v {
        m.insert("config_hash".into(), json!(hash));
        m.insert("seed".into(), json!(cfg.seed));
        m.insert("version".into(), json!(VERSION));
    }
    serde_json::to_string(&v).expect("records serialize")
}

/// The record stream exactly as written to `records.jsonl`.
pub fn record_stream(cfg: &ExperimentConfig, kind: Kind, records: &[Value]) -> String {
    let hash = cfg.hash();
    let canonical = ExperimentConfig { workers: 1, out: None, ..cfg.clone() };
    let header = json!({ "record": "header", "kind": kind.name(), "config": canonical.to_toml() });
    let mut s = stamp(header, cfg, &hash);
    s.push('\n');
    for r in records {
        s.push_str(&stamp(r.clone(), cfg, &hash));
        s.push('\n');
    }
    s
}

pub fn summary_table(cfg: &ExperimentConfig, kind: Kind, rows: &[(String, String)]) -> String {
    let mut s = format!("# {VERSION}\n# kind {}\n# config_hash {}\n", kind.name(), cfg.hash());
    for line in cfg.to_toml().lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(&summary_rows(rows));
    s
}

/// The aligned `label  value` rows alone.
pub fn summary_rows(rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    rows.iter().map(|(label, value)| format!("{label:<width$}  {value}\n")).collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes every artifact into `dir`, then the manifest, then re-reads each
/// listed file and checks its checksum.
pub fn write_dir(
    dir: &Path,
    cfg: &ExperimentConfig,
    kind: Kind,
    outcome: &Outcome,
    started: f64,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files: Vec<(String, String)> = vec![
        (RECORDS_FILE.into(), record_stream(cfg, kind, &outcome.records)),
        (SUMMARY_FILE.into(), summary_table(cfg, kind, &outcome.summary)),
    ];
    files.extend(outcome.files.iter().cloned());
    let hash = cfg.hash();
    let mut manifest = String::new();
    let mut lines = Vec::new();
    for (name, contents) in &files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io(&path, e))?;
        lines.push(json!({
            "record": "file",
            "file": name,
            "bytes": contents.len(),
            "sha256": sha256_hex(contents.as_bytes()),
        }));
    }
    let run = json!({
        "record": "run",
        "kind": kind.name(),
        "workers": cfg.workers,
        "start_unix": started,
        "end_unix": unix_now(),
    });
    manifest.push_str(&stamp(run, cfg, &hash));
    manifest.push('\n');
    for l in lines {
        manifest.push_str(&stamp(l, cfg, &hash));
        manifest.push('\n');
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, &manifest).map_err(|e| io(&path, e))?;
    verify_manifest(dir)?;
    Ok(path)
}

/// Checks every `file` line of `dir/manifest.jsonl` against the file on disk.
pub fn verify_manifest(dir: &Path) -> Result<usize, CliError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
    let mut checked = 0;
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if v["record"] != "file" {
            continue;
        }
        let name = v["file"].as_str().unwrap_or_default();
        let file = dir.join(name);
        let bytes = fs::read(&file).map_err(|e| io(&file, e))?;
        if v["sha256"].as_str() != Some(sha256_hex(&bytes).as_str()) {
            return Err(CliError::Io(format!("checksum mismatch for {}", file.display())));
        }
        checked += 1;
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::parse(
            "schema_version = 1\nseed = 3\noffspring = { 0 = 0.25, 2 = 0.75 }\nbias_atoms = [[2.0, 0.5], [3.0, 0.5]]\n",
        )
        .unwrap()
    }

    #[test]
    fn records_have_sorted_keys_and_provenance() {
        let mut o = Outcome::default();
        o.record("x", json!({ "zeta": 1, "alpha": 2.5 }));
        let s = record_stream(&cfg(), Kind::Gamma, &o.records);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"record\":\"header\""));
        assert!(lines[1].starts_with("{\"alpha\":2.5,\"config_hash\":"));
        assert!(lines[1].contains("\"version\":\"trapwalk 0.1.0\""));
    }

    #[test]
    fn manifest_verifies_and_catches_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outcome::default();
        o.row("gamma", 0.76);
        o.files.push(("extra.txt".into(), "hello\n".into()));
        write_dir(dir.path(), &cfg(), Kind::Gamma, &o, unix_now()).unwrap();
        assert_eq!(verify_manifest(dir.path()).unwrap(), 3);
        fs::write(dir.path().join("extra.txt"), "tampered\n").unwrap();
        assert!(verify_manifest(dir.path()).is_err());
    }
}
