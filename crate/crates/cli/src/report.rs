use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Plan,
    Compress,
    Optimize,
    Detect,
    GenData,
}

impl ExperimentKind {
    pub fn slug(&self) -> &'static str {
        match self {
            ExperimentKind::Plan => "plan",
            ExperimentKind::Compress => "compress",
            ExperimentKind::Optimize => "optimize",
            ExperimentKind::Detect => "detect",
            ExperimentKind::GenData => "gen-data",
        }
    }
}

/// A metric value; `None` renders as "n/a".
pub type Metric = Option<f64>;

/// Machine-readable record of one command run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub status: String,
    pub config: RunConfig,
    /// Metric name (`operation.quantity`) to value.
    pub metrics: BTreeMap<String, Metric>,
    /// Column headers and rows of the main result table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<Vec<String>>,
    pub artifacts: Vec<PathBuf>,
    /// Provider and retrieval calls per operation.
    pub ledger: BTreeMap<String, usize>,
    pub details: Value,
}

impl ExperimentReport {
    pub fn new(kind: ExperimentKind, config: &RunConfig) -> Self {
        Self {
            kind,
            status: "completed".into(),
            config: config.clone(),
            metrics: BTreeMap::new(),
            table: Vec::new(),
            artifacts: Vec::new(),
            ledger: BTreeMap::new(),
            details: Value::Null,
        }
    }

    pub fn metric(&mut self, name: &str, value: impl Into<Metric>) {
        self.metrics.insert(name.to_owned(), value.into());
    }

    pub fn default_path(&self) -> PathBuf {
        self.config.paths.output.join(format!("{}_report.json", self.kind.slug()))
    }

    /// Writes the JSON report and returns its path.
    pub fn write(&self, path: Option<&Path>) -> CliResult<PathBuf> {
        let path = path.map(Path::to_path_buf).unwrap_or_else(|| self.default_path());
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut json = serde_json::to_string_pretty(self).map_err(anyhow::Error::from)?;
        json.push('\n');
        std::fs::write(&path, json)?;
        Ok(path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} report ({})", self.kind.slug(), self.status);
        if !self.metrics.is_empty() {
            let width = self.metrics.keys().map(String::len).max().unwrap_or(0);
            let _ = writeln!(out, "\nmetrics:");
            for (k, v) in &self.metrics {
                let v = v.map_or("n/a".to_owned(), |x| format!("{x:.4}"));
                let _ = writeln!(out, "  {k:<width$}  {v}");
            }
        }
        if !self.table.is_empty() {
            let _ = writeln!(out);
            out.push_str(&render_table(&self.table));
        }
        if !self.artifacts.is_empty() {
            let _ = writeln!(out, "\nartifacts:");
            for a in &self.artifacts {
                let _ = writeln!(out, "  {}", a.display());
            }
        }
        if !self.ledger.is_empty() {
            let _ = writeln!(out, "\ncalls:");
            for (k, v) in &self.ledger {
                let _ = writeln!(out, "  {k}: {v}");
            }
        }
        out
    }
}

/// Aligned plain-text table; the first row is the header.
pub fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row.iter().enumerate().map(|(c, v)| format!("{v:<w$}", w = widths[c])).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_rendering_marks_missing_metrics() {
        let mut r = ExperimentReport::new(ExperimentKind::Compress, &RunConfig::default());
        r.metric("compress.ce_mean", None);
        r.metric("compress.blocks", 3.0);
        r.table = vec![vec!["K".into(), "CE".into()], vec!["1".into(), "2.9".into()]];
        let text = r.to_text();
        assert!(text.contains("n/a"));
        assert!(text.contains("3.0000"));
        assert!(text.contains("K  CE"));
    }
}
