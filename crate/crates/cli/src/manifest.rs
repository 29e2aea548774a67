//! Run manifests: what was run, with which seeds, and what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::error::{CliError, CliResult};
use crate::plot::{emit_plot, PlotSpec};
use crate::table::{write_synced, Table};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: String,
}

/// Trials `k*chunk..` of a block use stream `stream_base + k` of the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamBlock {
    pub label: String,
    pub stream_base: u64,
    pub trials: usize,
    pub chunk: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedLayout {
    pub seed: u64,
    pub blocks: Vec<StreamBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

/// A named scalar result; `target` and `passed` are set when the value is checked against a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: Option<bool>,
}

impl Metric {
    pub fn value(name: impl Into<String>, value: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            stderr: None,
            target: None,
            tolerance: None,
            passed: None,
        }
    }

    pub fn with_stderr(mut self, stderr: f64) -> Self {
        self.stderr = Some(stderr);
        self
    }

    /// Marks the metric passed when `|value − target| ≤ tolerance`.
    pub fn against(mut self, target: f64, tolerance: f64) -> Self {
        self.target = Some(target);
        self.tolerance = Some(tolerance);
        self.passed = Some((self.value - target).abs() <= tolerance);
        self
    }

    pub fn with_verdict(mut self, passed: bool) -> Self {
        self.passed = Some(passed);
        self
    }
}

/// Fields serialize in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Vec<Parameter>,
    pub seed: SeedLayout,
    pub code_version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub outputs: Vec<OutputFile>,
    pub results: Vec<Metric>,
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn parameter(&self, name: &str) -> Option<&str> {
        self.parameters
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.value.as_str())
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.results.iter().find(|m| m.name == name)
    }
}

fn now() -> String {
    OffsetDateTime::now_utc()
        .format(&Rfc3339)
        .unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An artifact-producing run: the manifest is on disk before any result is.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn start(
        dir: &Path,
        command: &str,
        parameters: Vec<Parameter>,
        seed: u64,
    ) -> CliResult<Run> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let run = Run {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                parameters,
                seed: SeedLayout {
                    seed,
                    blocks: Vec::new(),
                },
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                started_at: now(),
                finished_at: None,
                status: RunStatus::Running,
                error: None,
                outputs: Vec::new(),
                results: Vec::new(),
            },
        };
        run.save()?;
        Ok(run)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn save(&self) -> CliResult<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let json = serde_json::to_vec_pretty(&self.manifest).map_err(|source| CliError::Json {
            path: path.clone(),
            source,
        })?;
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        write_synced(&tmp, &json)?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))
    }

    fn record(&mut self, name: String, bytes: &[u8]) {
        self.manifest.outputs.retain(|o| o.path != name);
        self.manifest.outputs.push(OutputFile {
            path: name,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }

    pub fn write_table(&mut self, table: &Table) -> CliResult<PathBuf> {
        let bytes = table.to_csv()?;
        let path = self.dir.join(table.file_name());
        write_synced(&path, &bytes)?;
        self.record(table.file_name(), &bytes);
        Ok(path)
    }

    /// Renders a plot whose `input` and `output` are relative to the run directory.
    pub fn write_plot(&mut self, request: &PlotSpec) -> CliResult<PathBuf> {
        let resolved = PlotSpec {
            input: self.dir.join(&request.input),
            output: self.dir.join(&request.output),
            ..request.clone()
        };
        let path = emit_plot(&resolved)?;
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.record(request.output.to_string_lossy().into_owned(), &bytes);
        Ok(path)
    }

    pub fn set_layout(&mut self, blocks: Vec<StreamBlock>) {
        self.manifest.seed.blocks = blocks;
    }

    pub fn finish(mut self, results: Vec<Metric>) -> CliResult<RunManifest> {
        self.manifest.results = results;
        self.manifest.status = RunStatus::Complete;
        self.manifest.finished_at = Some(now());
        self.save()?;
        Ok(self.manifest)
    }

    pub fn fail(mut self, error: &CliError) -> CliResult<()> {
        self.manifest.status = RunStatus::Failed;
        self.manifest.error = Some(error.to_string());
        self.manifest.finished_at = Some(now());
        self.save()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::row;

    #[test]
    fn manifest_precedes_results_and_lists_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let params = vec![Parameter {
            name: "paths".into(),
            value: "10".into(),
        }];
        let mut run = Run::start(dir.path(), "walk nonintersection", params, 7).unwrap();
        let early = RunManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(early.status, RunStatus::Running);
        assert!(early.outputs.is_empty());

        let mut t = Table::new("probabilities", &["k", "p"]);
        t.push(row![256, 0.03]);
        run.write_table(&t).unwrap();
        let done = run
            .finish(vec![Metric::value("slope", -0.62).against(-0.625, 0.04)])
            .unwrap();
        let on_disk = RunManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(on_disk, done);
        assert_eq!(on_disk.status, RunStatus::Complete);
        let bytes = fs::read(dir.path().join("probabilities.csv")).unwrap();
        assert_eq!(on_disk.outputs[0].sha256, sha256_hex(&bytes));
        assert_eq!(on_disk.metric("slope").unwrap().passed, Some(true));
        assert_eq!(on_disk.parameter("paths"), Some("10"));
    }

    #[test]
    fn field_order_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let run = Run::start(dir.path(), "exponents table", Vec::new(), 1).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let keys = [
            "\"command\"",
            "\"parameters\"",
            "\"seed\"",
            "\"code_version\"",
            "\"started_at\"",
            "\"finished_at\"",
            "\"status\"",
            "\"error\"",
            "\"outputs\"",
            "\"results\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        run.finish(Vec::new()).unwrap();
    }
}
