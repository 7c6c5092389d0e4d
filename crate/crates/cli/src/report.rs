//! Artifact writing: RFC-4180-style CSV bodies, tab-separated plot data,
//! and the pass/fail summary. Output contains no timestamps, so a rerun
//! with the same config and seed reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn new(experiment: impl Into<String>, seed: u64, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            experiment: experiment.into(),
            seed,
            passed,
            checks,
        }
    }
}

/// Output directory handle; creates `output_dir` and `output_dir/plotdata`.
pub struct Artifacts {
    root: PathBuf,
}

impl Artifacts {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root.join("plotdata"))
            .with_context(|| format!("creating output dir {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write(&self, rel: &str, body: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Header row plus comma-joined numeric rows; '.' decimals always.
    pub fn write_csv(&self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut body = String::new();
        body.push_str(&header.join(","));
        body.push('\n');
        for row in rows {
            body.push_str(&row.join(","));
            body.push('\n');
        }
        self.write(rel, &body)
    }

    /// Tab-separated x/y table under `plotdata/`.
    pub fn write_plotdata(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut body = String::new();
        body.push_str(&header.join("\t"));
        body.push('\n');
        for row in rows {
            body.push_str(&row.join("\t"));
            body.push('\n');
        }
        self.write(&format!("plotdata/{name}"), &body)
    }

    pub fn write_text(&self, rel: &str, body: &str) -> Result<PathBuf> {
        self.write(rel, body)
    }

    pub fn write_summary(&self, summary: &Summary) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(summary)?;
        text.push('\n');
        self.write("summary.json", &text)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, &text)
    }
}

/// Formats a float for CSV; plain `to_string` is shortest-roundtrip and
/// locale-independent.
pub fn num(v: f64) -> String {
    v.to_string()
}
