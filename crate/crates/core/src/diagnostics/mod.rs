//! Heatmap rendering, semantic box classification and the semantic entropy
//! baseline.

mod heatmap;
mod semantic_box;
mod semantic_entropy;

use std::path::{Path, PathBuf};

pub use heatmap::{heatmap_csv, heatmap_svg, parse_heatmap_csv, render_heatmap};
pub use semantic_box::{classify_semantic_box, Axis, Regime, SemanticBoxVerdict, Thresholds};
pub use semantic_entropy::{cluster_sizes_entropy, greedy_clusters, se_suite, semantic_entropy, SEResult, SE_METHOD};

use crate::textproc::EmbedError;

#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Embed(#[from] EmbedError),

    #[error("at least one answer is required")]
    NoAnswers,

    #[error("malformed heatmap csv at line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), DiagnosticsError> {
    use std::io::Write;
    let io = |source| DiagnosticsError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
