//! Run reports: per-check pass/fail lines, a human-readable summary, and a
//! JSON metadata sidecar. All output files are written atomically
//! (temp file + rename) so interrupted runs never leave partial files.

use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("core: {0}")]
    Core(#[from] twinbeam_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub checks: Vec<CheckResult>,
    pub files: Vec<String>,
    #[serde(skip)]
    out_dir: PathBuf,
}

impl RunReport {
    pub fn new(scenario: &str, config_hash: &str, seed: u64, out_dir: &Path) -> Self {
        Self {
            scenario: scenario.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            checks: Vec::new(),
            files: Vec::new(),
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Writes a named output file atomically and records it.
    pub fn write_file(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        write_atomic(&self.out_dir.join(name), contents.as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Writes summary.txt and metadata.json; returns the process exit code
    /// (0 on success, 2 when a statistical check failed).
    pub fn finalize(&mut self) -> Result<i32, RunError> {
        let mut summary = format!(
            "scenario: {}\nconfig_hash: {}\nseed: {}\n\n",
            self.scenario, self.config_hash, self.seed
        );
        for c in &self.checks {
            summary.push_str(&format!(
                "[{}] {} - {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
        }
        let ok = self.all_passed();
        summary.push_str(&format!(
            "\nRESULT: {} ({} checks)\n",
            if ok { "PASS" } else { "FAIL" },
            self.checks.len()
        ));
        self.write_file("summary.txt", &summary)?;
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| RunError::Other(format!("metadata: {e}")))?;
        self.write_file("metadata.json", &json)?;
        Ok(if ok { 0 } else { 2 })
    }
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
