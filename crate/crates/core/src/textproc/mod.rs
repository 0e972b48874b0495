//! Sentence segmentation and embedding.

mod embed;
mod segment;

use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use embed::{
    normalize, provider_from_config, EmbedError, Embedder, EmbeddingCache, EmbeddingProvider, HashingEmbedder,
    OpenAiEmbeddings, NORM_TOLERANCE,
};
pub use segment::{segment, ABBREVIATIONS, MIN_SENTENCE_CHARS};

use crate::corpus::RunBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Prompt,
    Answer,
}

/// One sentence of the pooled prompt/answer corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub text: String,
    pub role: Role,
    /// Paraphrase index `m` of the pair the sentence belongs to.
    pub pair_index: usize,
    /// Answer sample index `n`; always `None` for prompt sentences.
    pub sample_index: Option<usize>,
    pub embedding: Vec<f64>,
    pub topic: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingBackend {
    #[default]
    #[serde(rename = "openai")]
    OpenAi,
    /// Offline bag-of-words hashing embedder.
    Hashing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingProviderConfig {
    pub backend: EmbeddingBackend,
    /// Full URL of an OpenAI-compatible `embeddings` endpoint.
    pub endpoint_url: String,
    pub api_key_ref: Option<String>,
    pub model_id: String,
    pub dimension: usize,
    pub cache_dir: Option<PathBuf>,
    pub batch_size: usize,
    pub max_parallel_requests: usize,
    pub retry_budget: u32,
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        Self {
            backend: EmbeddingBackend::OpenAi,
            endpoint_url: "http://localhost:8000/v1/embeddings".to_string(),
            api_key_ref: None,
            model_id: "Qwen/Qwen3-Embedding-0.6B".to_string(),
            dimension: 1024,
            cache_dir: None,
            batch_size: 64,
            max_parallel_requests: 4,
            retry_budget: 3,
        }
    }
}

impl EmbeddingProviderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dimension < 2 {
            return Err(format!("embedding dimension must be at least 2, got {}", self.dimension));
        }
        if self.max_parallel_requests < 1 {
            return Err("embedding max_parallel_requests must be at least 1".into());
        }
        Ok(())
    }
}

/// Segments every paraphrase and answer of `bundle` into sentence records
/// (embeddings still empty), prompts first, each group in `(m, n)` order.
pub fn sentences_from_bundle(bundle: &RunBundle) -> Vec<SentenceRecord> {
    let mut out = Vec::new();
    for (m, p) in bundle.paraphrases().iter().enumerate() {
        for text in segment(p) {
            out.push(SentenceRecord {
                text,
                role: Role::Prompt,
                pair_index: m,
                sample_index: None,
                embedding: Vec::new(),
                topic: None,
            });
        }
    }
    for (m, row) in bundle.answers().iter().enumerate() {
        for (n, a) in row.iter().enumerate() {
            for text in segment(a) {
                out.push(SentenceRecord {
                    text,
                    role: Role::Answer,
                    pair_index: m,
                    sample_index: Some(n),
                    embedding: Vec::new(),
                    topic: None,
                });
            }
        }
    }
    out
}

/// Embeds every record in place and returns the pooled `(S, d)` matrix in
/// record order.
pub fn embed_records(records: &mut [SentenceRecord], embedder: &Embedder<'_>) -> Result<Array2<f64>, EmbedError> {
    let texts: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
    let matrix = embedder.embed_sentences(&texts)?;
    for (rec, row) in records.iter_mut().zip(matrix.rows()) {
        rec.embedding = row.to_vec();
    }
    Ok(matrix)
}
