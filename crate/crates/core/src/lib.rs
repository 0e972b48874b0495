//! Semantic divergence metrics for LLM prompt/response ensembles.
//!
//! A run takes one prompt, rewrites it into `M` meaning-preserving
//! paraphrases, samples `N` answers for each, and then measures how far the
//! answers drift from the prompts in a shared sentence-level topic space:
//!
//! 1. [`corpus`] generates (or replays) the `M x N` [`corpus::RunBundle`].
//! 2. [`textproc`] splits every text into sentences and embeds them onto the
//!    unit sphere.
//! 3. [`topics`] picks the topic count with a K-means elbow and assigns
//!    final labels with Ward-linkage agglomerative clustering over the pooled
//!    prompt and answer sentences.
//! 4. [`metrics`] computes global and ensemble divergences (JSD, KL),
//!    entropies, mutual information, the exact 1-Wasserstein distance between
//!    the embedding clouds, and the final `S_H`, `phi` and KL scores.
//! 5. [`diagnostics`] renders the averaged co-occurrence heatmap, places the
//!    run in the semantic box, and computes the semantic entropy baseline.
//! 6. [`pipeline`] wires the stages together behind a config file and a run
//!    directory.
//!
//! All logarithms are base 2; every entropy and divergence is in bits.

pub mod corpus;
pub mod diagnostics;
pub mod metrics;
pub mod pipeline;
pub mod textproc;
pub mod topics;

mod parallel;

pub use corpus::{ChatProvider, ProviderConfig, RunBundle};
pub use metrics::{JointTopicMatrix, MetricsReport, TopicDistribution};
pub use pipeline::{run_pipeline, RunConfig};
pub use textproc::{EmbeddingProvider, EmbeddingProviderConfig, SentenceRecord};
pub use topics::ClusteringResult;

/// Errors raised by provider-backed stages (chat and embedding endpoints).
#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("request to {endpoint} failed: {message}")]
    Http { endpoint: String, message: String },

    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),

    #[error("malformed provider response: {0}")]
    BadResponse(String),

    #[error("provider gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
}

pub(crate) fn truncate(s: &str, max_chars: usize) -> &str {
    match s.char_indices().nth(max_chars) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}
