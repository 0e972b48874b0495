//! End-to-end runs: generate (or replay) a bundle, segment, embed, cluster,
//! compute metrics, classify, and write the run directory.
//!
//! Run directory layout:
//!
//! ```text
//! bundle.jsonl        the M x N ensemble (written first, kept on failure)
//! embeddings.cache/   content-addressed embedding cache
//! report.json         flat metrics report
//! report.csv          the same, one metric per line
//! heatmap.svg         averaged prompt/answer topic co-occurrence
//! heatmap.csv         the matrix behind the heatmap
//! verdict.json        semantic box classification (when the scores exist)
//! se.json             semantic entropy baseline (when enabled)
//! summary.md          human-readable summary
//! error.txt           stage and message of a failed run
//! ```

mod compare;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

pub use compare::{compare_runs, Comparison};
pub use config::{interpolate, ConfigError, DiagnosticsOptions, RunConfig};

use crate::corpus::{self, ChatProvider, CorpusError, OpenAiChat, RunBundle};
use crate::diagnostics::{self, DiagnosticsError, SEResult, SemanticBoxVerdict};
use crate::metrics::{self, MetricsError, MetricsReport, ReportError, CANONICAL_ROWS};
use crate::textproc::{self, EmbedError, Embedder, EmbeddingCache, EmbeddingProvider, Role};
use crate::topics::{self, ClusteringResult, TopicError};
use crate::ProviderError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),

    #[error("bundle: {0}")]
    Bundle(CorpusError),

    #[error("generate: {0}")]
    Generate(CorpusError),

    #[error("embed: {0}")]
    Embed(#[from] EmbedError),

    #[error("cluster: {0}")]
    Cluster(#[from] TopicError),

    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),

    #[error("diagnostics: {0}")]
    Diagnostics(#[from] DiagnosticsError),

    #[error("report: {0}")]
    Report(#[from] ReportError),

    #[error("write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

impl PipelineError {
    /// Name of the pipeline stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Bundle(_) => "bundle",
            PipelineError::Generate(_) => "generate",
            PipelineError::Embed(_) => "embed",
            PipelineError::Cluster(_) => "cluster",
            PipelineError::Metrics(_) => "metrics",
            PipelineError::Diagnostics(DiagnosticsError::Embed(_)) => "semantic-entropy",
            PipelineError::Diagnostics(_) => "diagnostics",
            PipelineError::Report(_) => "report",
            PipelineError::Io { .. } => "write",
        }
    }

    /// Process exit code: 2 configuration or input problems, 3 provider
    /// failures, 4 metric or degenerate-input failures.
    pub fn exit_code(&self) -> i32 {
        let provider = |e: &EmbedError| matches!(e, EmbedError::Provider(_));
        match self {
            PipelineError::Config(_) | PipelineError::Bundle(_) | PipelineError::Io { .. } => 2,
            // A missing key is a configuration problem, not a provider outage.
            PipelineError::Generate(CorpusError::Provider(ProviderError::MissingApiKey(_)))
            | PipelineError::Embed(EmbedError::Provider(ProviderError::MissingApiKey(_))) => 2,
            PipelineError::Report(ReportError::Schema { .. } | ReportError::Json(_)) => 2,
            PipelineError::Generate(CorpusError::Invalid(_)) => 2,
            PipelineError::Generate(_) => 3,
            PipelineError::Embed(e) | PipelineError::Diagnostics(DiagnosticsError::Embed(e)) if provider(e) => 3,
            PipelineError::Diagnostics(DiagnosticsError::Io { .. }) => 2,
            _ => 4,
        }
    }
}

/// Where the bundle of a run comes from.
pub enum Source<'a> {
    Generate { prompt: String, chat: &'a dyn ChatProvider },
    Bundle(RunBundle),
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run_dir: PathBuf,
    pub report: MetricsReport,
    pub clustering: ClusteringResult,
    pub verdict: Option<SemanticBoxVerdict>,
    pub se: Option<SEResult>,
}

/// `<output_dir>/run-<UTC timestamp>`, with a numeric suffix when taken.
pub fn timestamped_run_dir(output_dir: &Path, now: DateTime<Utc>) -> PathBuf {
    let base = format!("run-{}", now.format("%Y%m%dT%H%M%SZ"));
    let mut dir = output_dir.join(&base);
    let mut i = 1;
    while dir.exists() {
        dir = output_dir.join(format!("{base}-{i}"));
        i += 1;
    }
    dir
}

/// Runs the full pipeline with the providers named in `cfg`, writing a new
/// timestamped run directory under `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<MetricsReport, PipelineError> {
    Ok(run(cfg, None)?.report)
}

/// Like [`run_pipeline`], optionally into a given run directory, returning
/// every output.
pub fn run(cfg: &RunConfig, run_dir: Option<PathBuf>) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let prompt = cfg.prompt_text()?;
    let chat = OpenAiChat::from_config(&cfg.provider).map_err(|e| PipelineError::Generate(e.into()))?;
    let embed = textproc::provider_from_config(&cfg.embedding).map_err(embed_provider_error)?;
    let dir = run_dir.unwrap_or_else(|| timestamped_run_dir(&cfg.output_dir, Utc::now()));
    execute(cfg, Source::Generate { prompt, chat: &chat }, embed.as_ref(), &dir)
}

/// Re-runs every offline stage over a stored bundle.
pub fn replay(cfg: &RunConfig, bundle_path: &Path, run_dir: Option<PathBuf>) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let bundle = corpus::load_bundle(bundle_path).map_err(PipelineError::Bundle)?;
    let embed = textproc::provider_from_config(&cfg.embedding).map_err(embed_provider_error)?;
    let dir = run_dir.unwrap_or_else(|| timestamped_run_dir(&cfg.output_dir, Utc::now()));
    execute(cfg, Source::Bundle(bundle), embed.as_ref(), &dir)
}

fn embed_provider_error(e: ProviderError) -> PipelineError {
    PipelineError::Embed(EmbedError::Provider(e))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Runs every stage into `run_dir`. On failure the artifacts written so far
/// stay in place and `error.txt` records the failing stage.
pub fn execute(
    cfg: &RunConfig,
    source: Source<'_>,
    embed: &dyn EmbeddingProvider,
    run_dir: &Path,
) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    std::fs::create_dir_all(run_dir).map_err(io_err(run_dir))?;
    let result = execute_stages(cfg, source, embed, run_dir);
    if let Err(e) = &result {
        let _ = std::fs::write(run_dir.join("error.txt"), format!("stage: {}\n{e}\n", e.stage()));
        log::error!("run failed in stage {}: {e}", e.stage());
    }
    result
}

fn execute_stages(
    cfg: &RunConfig,
    source: Source<'_>,
    embed: &dyn EmbeddingProvider,
    run_dir: &Path,
) -> Result<RunOutput, PipelineError> {
    let bundle = match source {
        Source::Bundle(b) => b,
        Source::Generate { prompt, chat } => {
            log::info!("generating {} paraphrases x {} answers", cfg.m_paraphrases, cfg.n_answers);
            let paraphrases = corpus::generate_paraphrases(&prompt, cfg.m_paraphrases, &cfg.provider, chat)
                .map_err(PipelineError::Generate)?;
            corpus::generate_answers(&paraphrases, cfg.n_answers, &cfg.provider, chat).map_err(PipelineError::Generate)?
        }
    };
    let bundle_path = run_dir.join("bundle.jsonl");
    corpus::save_bundle(&bundle, &bundle_path).map_err(PipelineError::Bundle)?;

    let mut records = textproc::sentences_from_bundle(&bundle);
    log::info!("{} sentences from a {}x{} bundle", records.len(), bundle.m(), bundle.n());
    let cache_dir = cfg.embedding.cache_dir.clone().unwrap_or_else(|| run_dir.join("embeddings.cache"));
    let embedder = Embedder::new(embed, cfg.embedding.dimension)
        .with_cache(EmbeddingCache::new(cache_dir))
        .with_max_parallel(cfg.embedding.max_parallel_requests);
    let pooled = textproc::embed_records(&mut records, &embedder)?;

    let clustering = topics::cluster_topics(pooled.view(), &cfg.cluster_options())?;
    log::info!("k = {} ({})", clustering.k, clustering.method_trace);
    let (_, views) = topics::assign_labels(&bundle, &records, &clustering)?;

    let n_prompt = records.iter().filter(|r| r.role == Role::Prompt).count();
    let prompt_emb = pooled.slice(ndarray::s![..n_prompt, ..]);
    let answer_emb = pooled.slice(ndarray::s![n_prompt.., ..]);
    let out = metrics::compute_metrics(&views, prompt_emb, answer_emb, &cfg.metrics)?;
    let mut report = out.report;

    diagnostics::render_heatmap(&out.joint, &run_dir.join("heatmap.svg"), &run_dir.join("heatmap.csv"))?;

    let se = if cfg.diagnostics.semantic_entropy {
        let se = diagnostics::se_suite(&bundle, cfg.diagnostics.se_threshold, &embedder)?;
        report.se_original = Some(se.se_original);
        report.se_mean = Some(se.se_mean);
        let json = serde_json::to_string_pretty(&se).expect("SE result serializes");
        write_file(&run_dir.join("se.json"), &(json + "\n"))?;
        Some(se)
    } else {
        None
    };

    let verdict = match (report.s_h, report.kl_score) {
        (Some(s_h), Some(kl)) => {
            let v = diagnostics::classify_semantic_box(s_h, kl, cfg.diagnostics.thresholds());
            write_file(&run_dir.join("verdict.json"), &v.to_json())?;
            Some(v)
        }
        _ => None,
    };

    report.check_consistency()?;
    write_file(&run_dir.join("report.json"), &report.to_json())?;
    write_file(&run_dir.join("report.csv"), &report.to_csv())?;
    write_file(&run_dir.join("summary.md"), &summary(&bundle, &report, &clustering, verdict.as_ref(), se.as_ref()))?;

    Ok(RunOutput { run_dir: run_dir.to_path_buf(), report, clustering, verdict, se })
}

fn summary(
    bundle: &RunBundle,
    report: &MetricsReport,
    clustering: &ClusteringResult,
    verdict: Option<&SemanticBoxVerdict>,
    se: Option<&SEResult>,
) -> String {
    let mut s = String::from("# Semantic divergence run\n\n");
    let _ = writeln!(s, "Prompt:\n\n> {}\n", bundle.original_prompt().replace('\n', "\n> "));
    let _ = writeln!(
        s,
        "- model: `{}` at temperature {}\n- paraphrases x answers: {} x {}\n- sentences: {} prompt, {} answer\n- topics: k = {} ({})\n- pairs used: {} (skipped {})\n",
        bundle.model_id(),
        bundle.sampling_temperature(),
        bundle.m(),
        bundle.n(),
        report.prompt_sentences,
        report.answer_sentences,
        clustering.k,
        clustering.method_trace,
        report.pairs_used,
        report.pairs_skipped,
    );
    if !clustering.inertia_curve.is_empty() {
        let curve: Vec<String> = clustering.inertia_curve.iter().map(|(k, i)| format!("{k}: {i:.3}")).collect();
        let _ = writeln!(s, "K-means inertia by k: {}\n", curve.join(", "));
    }
    s.push_str("| Metric | Value |\n|---|---:|\n");
    for (name, get) in CANONICAL_ROWS {
        let v = get(report).map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(s, "| {name} | {v} |");
    }
    s.push('\n');
    match verdict {
        Some(v) => {
            let _ = writeln!(
                s,
                "Semantic box: **{:?}** (instability {:?} at S* = {}, exploration {:?} at KL* = {}).",
                v.regime, v.instability_axis, v.thresholds.s_star, v.exploration_axis, v.thresholds.kl_star
            );
        }
        None => s.push_str("Semantic box: not classified; the prompt falls in a single topic (H(P) = 0).\n"),
    }
    if let Some(se) = se {
        let _ = writeln!(s, "\nSemantic entropy uses {} at cosine >= {}.", se.cluster_method, se.threshold);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EchoChat;
    use crate::textproc::HashingEmbedder;

    fn offline_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.embedding.backend = textproc::EmbeddingBackend::Hashing;
        cfg.embedding.dimension = 64;
        cfg
    }

    #[test]
    fn identity_run_has_zero_divergence() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = offline_config();
        cfg.m_paraphrases = 1;
        cfg.n_answers = 1;
        let src = Source::Generate { prompt: "Tides follow the moon.".into(), chat: &EchoChat };
        let out = execute(&cfg, src, &HashingEmbedder::new(64), dir.path()).unwrap();
        let r = &out.report;
        assert_eq!((r.global_jsd, r.ensemble_jsd, r.wasserstein), (0.0, 0.0, 0.0));
        assert!(r.global_kl_ap < 1e-9 && r.ensemble_kl_ap < 1e-9);
        assert_eq!(r.s_h, None);
        assert!(out.verdict.is_none());
        for f in ["bundle.jsonl", "report.json", "report.csv", "heatmap.svg", "heatmap.csv", "summary.md", "se.json"] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        assert!(dir.path().join("embeddings.cache").is_dir());
    }

    #[test]
    fn failure_keeps_bundle_and_records_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = offline_config();
        cfg.m_paraphrases = 1;
        cfg.n_answers = 1;
        // A one-character answer yields no sentences, so no pair is usable.
        let bundle = RunBundle::new(
            vec!["Tides follow the moon. Waves follow the wind.".into()],
            vec![vec!["x".into()]],
            "m",
            1.0,
            Utc::now(),
            serde_json::Value::Null,
        )
        .unwrap();
        let err = execute(&cfg, Source::Bundle(bundle), &HashingEmbedder::new(64), dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(dir.path().join("bundle.jsonl").exists());
        assert!(std::fs::read_to_string(dir.path().join("error.txt")).unwrap().starts_with("stage: "));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 2);
        let provider = ProviderError::BadResponse("x".into());
        assert_eq!(PipelineError::Generate(CorpusError::Provider(provider)).exit_code(), 3);
        assert_eq!(embed_provider_error(ProviderError::BadResponse("x".into())).exit_code(), 3);
        assert_eq!(embed_provider_error(ProviderError::MissingApiKey("K".into())).exit_code(), 2);
        assert_eq!(PipelineError::Metrics(MetricsError::AllPairsEmpty).exit_code(), 4);
        assert_eq!(PipelineError::Cluster(TopicError::DegenerateGeometry).exit_code(), 4);
    }

    #[test]
    fn run_dirs_do_not_collide() {
        let dir = tempfile::tempdir().unwrap();
        let now = Utc::now();
        let first = timestamped_run_dir(dir.path(), now);
        std::fs::create_dir_all(&first).unwrap();
        let second = timestamped_run_dir(dir.path(), now);
        assert_ne!(first, second);
        assert!(second.to_string_lossy().ends_with("-1"));
    }
}
