//! `qrec report`: aggregate `verdicts.json` files into one summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{io_err, VerdictFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub source: String,
    pub experiment: String,
    pub manifest_sha256: String,
    pub passed: bool,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub passed: bool,
    pub runs: Vec<ReportEntry>,
}

/// Accepts run directories or `verdicts.json` paths.
pub fn build(paths: &[PathBuf]) -> Result<Report, CliError> {
    if paths.is_empty() {
        return Err(CliError::field("paths", "no run directories given"));
    }
    let mut runs = Vec::new();
    for p in paths {
        let file = if p.is_dir() { p.join("verdicts.json") } else { p.clone() };
        let text = fs::read_to_string(&file).map_err(io_err(&file))?;
        let v = parse(&file, &text)?;
        runs.push(ReportEntry {
            source: p.display().to_string(),
            experiment: v.experiment,
            manifest_sha256: v.manifest_sha256,
            passed: v.passed,
            failed: v.verdicts.iter().filter(|d| !d.passed()).map(|d| d.name.clone()).collect(),
        });
    }
    Ok(Report { passed: runs.iter().all(|r| r.passed), runs })
}

fn parse(file: &Path, text: &str) -> Result<VerdictFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::field(format!("{}: {}", file.display(), e.path()), e.into_inner()))
}
