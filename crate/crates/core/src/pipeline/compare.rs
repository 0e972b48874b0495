use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::PipelineError;
use crate::metrics::{MetricsReport, CANONICAL_ROWS};

/// Side-by-side metric table, one column per run.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub columns: Vec<String>,
    /// `(metric name, one value per column)` in canonical order.
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

impl Comparison {
    pub fn from_reports(columns: Vec<String>, reports: &[MetricsReport]) -> Self {
        let rows = CANONICAL_ROWS
            .iter()
            .map(|(name, get)| (name.to_string(), reports.iter().map(get).collect()))
            .collect();
        Self { columns, rows }
    }

    pub fn to_csv(&self) -> String {
        let quote = |s: &str| {
            if s.contains([',', '"']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = String::from("metric");
        for c in &self.columns {
            let _ = write!(out, ",{}", quote(c));
        }
        out.push('\n');
        for (name, values) in &self.rows {
            out.push_str(&quote(name));
            for v in values {
                let _ = write!(out, ",{}", cell(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Metric |");
        for c in &self.columns {
            let _ = write!(out, " {c} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.columns.len()));
        out.push('\n');
        for (name, values) in &self.rows {
            let _ = write!(out, "| {name} |");
            for v in values {
                let _ = write!(out, " {} |", cell(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Column label for a report path: the run directory name for
/// `.../<run>/report.json`, else the file stem.
fn column_name(path: &Path) -> String {
    let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned());
    if path.file_name().is_some_and(|f| f == "report.json") {
        if let Some(dir) = path.parent().and_then(name) {
            return dir;
        }
    }
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Loads two or more reports (files or run directories) into a comparison.
pub fn compare_runs(paths: &[PathBuf]) -> Result<Comparison, PipelineError> {
    if paths.len() < 2 {
        return Err(PipelineError::Config("compare needs at least two reports".into()));
    }
    let mut columns = Vec::new();
    let mut reports = Vec::new();
    for p in paths {
        let file = if p.is_dir() { p.join("report.json") } else { p.clone() };
        let text = std::fs::read_to_string(&file).map_err(|source| PipelineError::Io { path: file.clone(), source })?;
        reports.push(MetricsReport::from_json(&text)?);
        columns.push(column_name(&file));
    }
    Ok(Comparison::from_reports(columns, &reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_names() {
        assert_eq!(column_name(Path::new("runs/run-a/report.json")), "run-a");
        assert_eq!(column_name(Path::new("hubble.json")), "hubble");
    }

    #[test]
    fn too_few_reports() {
        assert!(matches!(compare_runs(&[PathBuf::from("a.json")]), Err(PipelineError::Config(_))));
    }

    #[test]
    fn quoting_and_na() {
        let c = Comparison { columns: vec!["a,b".into()], rows: vec![("x".into(), vec![None])] };
        assert_eq!(c.to_csv(), "metric,\"a,b\"\nx,n/a\n");
        assert_eq!(c.to_markdown(), "| Metric | a,b |\n|---|---:|\n| x | n/a |\n");
    }
}
