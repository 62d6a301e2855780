//! Writing run artifacts. Every file carries the manifest hash: CSVs on a
//! leading `# manifest_sha256=` comment line, JSON files as a field.

use std::fs;
use std::path::{Path, PathBuf};

use qrec::laws::{Outcome, Verdict};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::experiments::{RunOutput, Table};
use crate::manifest::Manifest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictFile {
    pub manifest_sha256: String,
    pub experiment: String,
    pub passed: bool,
    pub verdicts: Vec<Verdict>,
}

impl VerdictFile {
    pub fn new(manifest: &Manifest, verdicts: Vec<Verdict>) -> Self {
        VerdictFile {
            manifest_sha256: manifest.sha256(),
            experiment: manifest.experiment.name().to_string(),
            passed: verdicts.iter().all(Verdict::passed),
            verdicts,
        }
    }
}

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

pub fn render_csv(hash: &str, t: &Table) -> String {
    let mut s = format!("# manifest_sha256={hash}\n{}\n", t.header);
    for r in &t.rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

pub fn render_verdicts(v: &VerdictFile) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("verdicts serialize");
    s.push('\n');
    s
}

/// Write `manifest.json`, the tables and `verdicts.json` under `dir`.
pub fn write_all(dir: &Path, manifest: &Manifest, version: &str, out: RunOutput) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let hash = manifest.sha256();
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<(), CliError> {
        let p = dir.join(name);
        fs::write(&p, body).map_err(io_err(&p))?;
        written.push(p);
        Ok(())
    };
    put("manifest.json", manifest.resolved_json(version))?;
    for t in &out.tables {
        put(t.file, render_csv(&hash, t))?;
    }
    put("verdicts.json", render_verdicts(&VerdictFile::new(manifest, out.verdicts)))?;
    Ok(written)
}

/// One line per verdict for the terminal.
pub fn summary_lines(v: &VerdictFile) -> Vec<String> {
    v.verdicts
        .iter()
        .map(|d| {
            let tag = match d.verdict {
                Outcome::Pass => "PASS",
                Outcome::Fail => "FAIL",
                Outcome::Info => "info",
            };
            let bounds = match (d.lower, d.upper) {
                (Some(l), Some(u)) => format!(" in [{}, {}]", short(l), short(u)),
                (None, Some(u)) => format!(" <= {}", short(u)),
                (Some(l), None) => format!(" >= {}", short(l)),
                (None, None) => String::new(),
            };
            format!("{tag} {}: {}{bounds} (n={})", d.name, short(d.statistic), d.n)
        })
        .collect()
}

fn short(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{}", (x * 1e6).round() / 1e6)
    } else {
        format!("{x:.3e}")
    }
}
