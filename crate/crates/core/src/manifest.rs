//! Artifact manifest: every produced file with its hash, plus named checks.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotHint {
    pub title: String,
    pub x: String,
    pub y: Vec<String>,
    #[serde(default)]
    pub log_x: bool,
    #[serde(default)]
    pub log_y: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotHint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    /// Advisory checks only fail a run in strict mode.
    #[serde(default)]
    pub advisory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub strict: bool,
    pub files: Vec<FileEntry>,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub failed: Vec<String>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    /// The only field that changes between identical runs.
    #[serde(default)]
    pub created_unix: u64,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects files and checks while an experiment runs.
#[derive(Debug)]
pub struct ManifestBuilder {
    pub dir: PathBuf,
    manifest: Manifest,
}

impl ManifestBuilder {
    pub fn new(dir: &Path, experiment: &str, seed: u64, strict: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                experiment: experiment.into(),
                seed,
                strict,
                files: Vec::new(),
                checks: Vec::new(),
                failed: Vec::new(),
                diagnostics: Vec::new(),
                created_unix: 0,
            },
        })
    }

    pub fn add_file(&mut self, path: &Path, role: &str, plot: Option<PlotHint>) -> Result<()> {
        let rel = path
            .strip_prefix(&self.dir)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        self.manifest.files.push(FileEntry {
            sha256: sha256_file(path)?,
            path: rel,
            role: role.into(),
            plot,
        });
        Ok(())
    }

    pub fn add_files(&mut self, paths: &[PathBuf], role: &str) -> Result<()> {
        for p in paths {
            self.add_file(p, role, None)?;
        }
        Ok(())
    }

    /// Writes a CSV table and registers it.
    pub fn table(
        &mut self,
        name: &str,
        headers: &[&str],
        rows: &[Vec<f64>],
        plot: Option<PlotHint>,
    ) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "{}", headers.join(","))?;
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        drop(w);
        self.add_file(&path, "table", plot)?;
        Ok(path)
    }

    /// Writes pretty JSON and registers it.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(value)?)?;
        self.add_file(&path, "report", None)?;
        Ok(path)
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, value: f64, threshold: f64) {
        self.push_check(name.into(), pass, value, threshold, false);
    }

    pub fn advisory(&mut self, name: impl Into<String>, pass: bool, value: f64, threshold: f64) {
        self.push_check(name.into(), pass, value, threshold, true);
    }

    fn push_check(&mut self, name: String, pass: bool, value: f64, threshold: f64, advisory: bool) {
        self.manifest.checks.push(Check {
            name,
            pass,
            value,
            threshold,
            advisory,
        });
    }

    pub fn diagnostic(&mut self, msg: impl Into<String>) {
        let m = msg.into();
        log::warn!("{m}");
        self.manifest.diagnostics.push(m);
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Fills in failures and the timestamp, and writes `manifest.json`.
    pub fn finish(mut self) -> Result<Manifest> {
        let strict = self.manifest.strict;
        self.manifest.failed = self
            .manifest
            .checks
            .iter()
            .filter(|c| !c.pass && (strict || !c.advisory))
            .map(|c| c.name.clone())
            .collect();
        self.manifest.created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        fs::write(
            self.dir.join(MANIFEST_NAME),
            serde_json::to_string_pretty(&self.manifest)?,
        )?;
        Ok(self.manifest)
    }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }

    /// 0 when every (non-advisory) check passed, 1 otherwise.
    pub fn exit_status(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}
