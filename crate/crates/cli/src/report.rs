//! Summary of stored runs, read from their manifests only.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};
use crate::experiments::exponents;
use crate::experiments::Outcome;
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::row;
use crate::table::Table;

/// Every `manifest.json` below `root`, in sorted path order.
pub fn find_manifests(root: &Path) -> CliResult<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == MANIFEST_FILE) {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The landmark table and one row per stored metric; tables `landmarks`, `dimensions` and `results`.
///
/// `skip` excludes a directory, normally the report's own output.
pub fn report(root: &Path, skip: Option<&Path>) -> CliResult<Outcome> {
    let mut out = exponents::table();
    let mut results = Table::new(
        "results",
        &[
            "run",
            "command",
            "status",
            "metric",
            "value",
            "stderr",
            "target",
            "tolerance",
            "passed",
        ],
    );
    let skip = skip.and_then(|s| s.canonicalize().ok());
    for path in find_manifests(root)? {
        let dir = path.parent().unwrap_or(root);
        if skip
            .as_deref()
            .is_some_and(|s| dir.canonicalize().ok().as_deref() == Some(s))
        {
            continue;
        }
        let m = RunManifest::read(&path)?;
        let run = dir.strip_prefix(root).unwrap_or(dir).display().to_string();
        let status = serde_json::to_value(m.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        for metric in &m.results {
            results.push(row![
                run,
                m.command,
                status,
                metric.name,
                metric.value,
                opt(metric.stderr),
                opt(metric.target),
                opt(metric.tolerance),
                metric.passed.map(|p| p.to_string()).unwrap_or_default()
            ]);
        }
    }
    out.metrics.clear();
    out.tables.push(results);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{Metric, Run};

    #[test]
    fn collects_metrics_without_rerunning() {
        let root = tempfile::tempdir().unwrap();
        for (name, value) in [("a", 1.5), ("b/c", -0.6)] {
            let run = Run::start(&root.path().join(name), "demo", Vec::new(), 1).unwrap();
            run.finish(vec![Metric::value("slope", value).against(-0.625, 0.04)])
                .unwrap();
        }
        let out = report(root.path(), None).unwrap();
        let rows = &out.table("results").unwrap().rows;
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][0], "a");
        assert_eq!(rows[1][4], "-0.6");
        assert_eq!(rows[1][8], "true");
        assert!(out.table("landmarks").is_some());
    }
}
