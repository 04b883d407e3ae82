//! Writes a report to disk: artifacts, a summary and a manifest of hashes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::experiments::Report;
use crate::{exit, ExperimentConfig, HarnessError};

pub const SUMMARY_FILE: &str = "summary.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One line per check and a closing verdict.
pub fn summary(report: &Report) -> String {
    let mut s = String::new();
    for c in &report.checks {
        writeln!(
            s,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )
        .unwrap();
    }
    for n in &report.notes {
        writeln!(s, "note {n}").unwrap();
    }
    if let Some(e) = &report.failure {
        writeln!(s, "INCOMPLETE {e}").unwrap();
    }
    writeln!(s, "overall {}", outcome(report)).unwrap();
    s
}

pub fn outcome(report: &Report) -> &'static str {
    if report.failure.is_some() {
        "incomplete"
    } else if report.passed() {
        "pass"
    } else {
        "fail"
    }
}

pub fn exit_code(report: &Report) -> i32 {
    match &report.failure {
        Some(e) => e.exit_code(),
        None if report.passed() => exit::PASS,
        None => exit::EXPECTATION,
    }
}

fn write(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes every artifact plus the summary and manifest into the configured
/// directory. The manifest carries no timestamps so identical runs produce
/// identical files.
pub fn write_report(config: &ExperimentConfig, report: &Report) -> Result<(), HarnessError> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let summary_text = summary(report);
    let mut files: Vec<(&str, &[u8])> = report
        .artifacts
        .iter()
        .map(|a| (a.name.as_str(), a.contents.as_bytes()))
        .collect();
    files.push((SUMMARY_FILE, summary_text.as_bytes()));
    files.sort_by(|a, b| a.0.cmp(b.0));

    let mut manifest = String::new();
    writeln!(manifest, "tool={}", env!("CARGO_PKG_NAME")).unwrap();
    writeln!(manifest, "version={}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(
        manifest,
        "status={}",
        if report.failure.is_some() {
            "incomplete"
        } else {
            "complete"
        }
    )
    .unwrap();
    for (k, v) in config.resolved() {
        writeln!(manifest, "config.{k}={v}").unwrap();
    }
    for (name, bytes) in &files {
        write(&dir.join(name), bytes)?;
        writeln!(manifest, "file.{name}={}", sha256_hex(bytes)).unwrap();
    }
    writeln!(manifest, "outcome={}", outcome(report)).unwrap();
    write(&dir.join(MANIFEST_FILE), manifest.as_bytes())
}

/// Parses a manifest into `(key, value)` pairs.
pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
