use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::{EmbeddingBackend, EmbeddingProviderConfig};
use crate::parallel::try_map_indexed;
use crate::{truncate, ProviderError};

/// Largest tolerated deviation of a stored row's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error("provider returned dimension {got} for {text:?}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize, text: String },

    #[error("provider returned a zero or non-finite vector for {0:?}")]
    DegenerateVector(String),

    #[error("nothing to embed")]
    Empty,

    #[error("embedding cache error at {path}: {message}")]
    Cache { path: PathBuf, message: String },
}

/// A sentence-embedding backend. Vectors need not be normalized.
pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;

    /// Maximum number of inputs per request.
    fn max_batch(&self) -> usize {
        64
    }
}

/// Builds the provider named by `cfg.backend`.
pub fn provider_from_config(cfg: &EmbeddingProviderConfig) -> Result<Box<dyn EmbeddingProvider>, ProviderError> {
    Ok(match cfg.backend {
        EmbeddingBackend::OpenAi => Box::new(OpenAiEmbeddings::from_config(cfg)?),
        EmbeddingBackend::Hashing => Box::new(HashingEmbedder::new(cfg.dimension)),
    })
}

/// Offline bag-of-words embedder.
///
/// Each lowercase word token maps to a fixed Gaussian vector seeded from the
/// SHA-256 of the token; a text embeds as the sum of its token vectors. Texts
/// that share vocabulary land close together, texts over disjoint vocabulary
/// are nearly orthogonal for large dimensions, and identical texts always get
/// identical vectors.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
    model_id: String,
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "have", "in", "is", "it", "its",
    "of", "on", "or", "that", "the", "this", "to", "was", "were", "which", "with",
];

impl HashingEmbedder {
    pub const MODEL_ID: &'static str = "hashing-bow-v1";

    pub fn new(dimension: usize) -> Self {
        Self { dimension, model_id: format!("{}-d{dimension}", Self::MODEL_ID) }
    }

    fn token_vector(&self, token: &str, acc: &mut [f64]) {
        let digest = Sha256::digest(format!("{}\u{0}{token}", Self::MODEL_ID).as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        for x in acc.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += z;
        }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut acc = vec![0.0; self.dimension];
        let mut any = false;
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let token = token.to_lowercase();
            if STOPWORDS.contains(&token.as_str()) {
                continue;
            }
            self.token_vector(&token, &mut acc);
            any = true;
        }
        if !any {
            self.token_vector(text, &mut acc);
        }
        acc
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn max_batch(&self) -> usize {
        usize::MAX
    }
}

/// Client for an OpenAI-compatible `embeddings` endpoint.
pub struct OpenAiEmbeddings {
    agent: ureq::Agent,
    endpoint: String,
    model_id: String,
    api_key: Option<String>,
    batch_size: usize,
    retry_budget: u32,
    backoff: Duration,
}

impl OpenAiEmbeddings {
    pub fn from_config(cfg: &EmbeddingProviderConfig) -> Result<Self, ProviderError> {
        let api_key = match &cfg.api_key_ref {
            Some(var) => Some(std::env::var(var).map_err(|_| ProviderError::MissingApiKey(var.clone()))?),
            None => None,
        };
        Ok(Self {
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
            endpoint: cfg.endpoint_url.clone(),
            model_id: cfg.model_id.clone(),
            api_key,
            batch_size: cfg.batch_size.max(1),
            retry_budget: cfg.retry_budget,
            backoff: Duration::from_millis(500),
        })
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, (bool, String)> {
        let mut req = self.agent.post(&self.endpoint).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = json!({ "model": self.model_id, "input": texts });
        let value: serde_json::Value = match req.send_json(body) {
            Ok(resp) => resp.into_json().map_err(|e| (false, format!("invalid JSON body: {e}")))?,
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                return Err((code == 429 || code >= 500, format!("HTTP {code}: {}", truncate(&text, 200))));
            }
            Err(e) => return Err((true, e.to_string())),
        };

        #[derive(Deserialize)]
        struct Item {
            index: usize,
            embedding: Vec<f64>,
        }
        let items: Vec<Item> = serde_json::from_value(value["data"].clone())
            .map_err(|e| (false, format!("missing or malformed data array: {e}")))?;
        if items.len() != texts.len() {
            return Err((false, format!("{} embeddings for {} inputs", items.len(), texts.len())));
        }
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        for item in items {
            let slot = out.get_mut(item.index).ok_or((false, format!("index {} out of range", item.index)))?;
            *slot = Some(item.embedding);
        }
        out.into_iter().map(|v| v.ok_or((false, "duplicate embedding index".to_string()))).collect()
    }
}

impl EmbeddingProvider for OpenAiEmbeddings {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn max_batch(&self) -> usize {
        self.batch_size
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let mut last = String::new();
        for attempt in 0..=self.retry_budget {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            match self.attempt(texts) {
                Ok(v) => return Ok(v),
                Err((false, message)) => {
                    return Err(ProviderError::Http { endpoint: self.endpoint.clone(), message })
                }
                Err((true, message)) => {
                    log::warn!("embedding request failed (attempt {}): {message}", attempt + 1);
                    last = message;
                }
            }
        }
        Err(ProviderError::RetriesExhausted { attempts: self.retry_budget + 1, last })
    }
}

/// Content-addressed vector store: one JSON file per `(model_id, text)` key.
///
/// The file name is the hex SHA-256 of `model_id`, a NUL byte and the
/// sentence text. Each file holds `{"model_id", "dimension", "vector"}` with
/// the already-normalized vector.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    model_id: String,
    dimension: usize,
    vector: Vec<f64>,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(model_id: &str, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(model_id.as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, model_id: &str, text: &str) -> PathBuf {
        self.dir.join(format!("{}.json", Self::key(model_id, text)))
    }

    pub fn get(&self, model_id: &str, text: &str, dimension: usize) -> Result<Option<Vec<f64>>, EmbedError> {
        let path = self.path(model_id, text);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(EmbedError::Cache { path, message: e.to_string() }),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|e| EmbedError::Cache { path: path.clone(), message: e.to_string() })?;
        if entry.model_id != model_id || entry.dimension != dimension || entry.vector.len() != dimension {
            return Err(EmbedError::Cache { path, message: "entry does not match model or dimension".into() });
        }
        Ok(Some(entry.vector))
    }

    pub fn put(&self, model_id: &str, text: &str, vector: &[f64]) -> Result<(), EmbedError> {
        let path = self.path(model_id, text);
        let cache_err = |message: String| EmbedError::Cache { path: path.clone(), message };
        std::fs::create_dir_all(&self.dir).map_err(|e| cache_err(e.to_string()))?;
        let entry = CacheEntry { model_id: model_id.to_string(), dimension: vector.len(), vector: vector.to_vec() };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| cache_err(e.to_string()))?;
        serde_json::to_writer(tmp.as_file_mut(), &entry).map_err(|e| cache_err(e.to_string()))?;
        tmp.persist(&path).map_err(|e| cache_err(e.error.to_string()))?;
        Ok(())
    }
}

/// Scales `v` to unit L2 norm in place.
pub fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

/// Embeds sentences through a provider, with optional on-disk caching.
pub struct Embedder<'a> {
    provider: &'a dyn EmbeddingProvider,
    dimension: usize,
    cache: Option<EmbeddingCache>,
    max_parallel: usize,
}

impl<'a> Embedder<'a> {
    pub fn new(provider: &'a dyn EmbeddingProvider, dimension: usize) -> Self {
        Self { provider, dimension, cache: None, max_parallel: 1 }
    }

    pub fn with_cache(mut self, cache: EmbeddingCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_max_parallel(mut self, n: usize) -> Self {
        self.max_parallel = n.max(1);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Returns a `(sentences.len(), d)` matrix of unit-norm rows.
    ///
    /// Each distinct text is fetched at most once; repeated texts share one
    /// vector, so equal inputs always produce equal rows.
    pub fn embed_sentences(&self, sentences: &[String]) -> Result<Array2<f64>, EmbedError> {
        if sentences.is_empty() {
            return Err(EmbedError::Empty);
        }
        let model = self.provider.model_id();

        let mut unique: Vec<&str> = Vec::new();
        let mut index: HashMap<&str, usize> = HashMap::new();
        for s in sentences {
            index.entry(s.as_str()).or_insert_with(|| {
                unique.push(s.as_str());
                unique.len() - 1
            });
        }

        let mut vectors: Vec<Option<Vec<f64>>> = vec![None; unique.len()];
        if let Some(cache) = &self.cache {
            for (i, text) in unique.iter().enumerate() {
                vectors[i] = cache.get(model, text, self.dimension)?;
            }
        }

        let missing: Vec<usize> = (0..unique.len()).filter(|&i| vectors[i].is_none()).collect();
        if !missing.is_empty() {
            let batch = self.provider.max_batch().max(1);
            let batches: Vec<&[usize]> = missing.chunks(batch).collect();
            let fetched = try_map_indexed(&batches, self.max_parallel, |_, ids| {
                let texts: Vec<String> = ids.iter().map(|&i| unique[i].to_string()).collect();
                let raw = self.provider.embed_batch(&texts)?;
                if raw.len() != texts.len() {
                    return Err(EmbedError::Provider(ProviderError::BadResponse(format!(
                        "{} vectors for {} inputs",
                        raw.len(),
                        texts.len()
                    ))));
                }
                raw.into_iter()
                    .zip(texts)
                    .map(|(mut v, text)| {
                        if v.len() != self.dimension {
                            return Err(EmbedError::DimensionMismatch { expected: self.dimension, got: v.len(), text });
                        }
                        if !normalize(&mut v) {
                            return Err(EmbedError::DegenerateVector(text));
                        }
                        Ok(v)
                    })
                    .collect::<Result<Vec<_>, _>>()
            })?;
            for (ids, vs) in batches.iter().zip(fetched) {
                for (&i, v) in ids.iter().zip(vs) {
                    if let Some(cache) = &self.cache {
                        cache.put(model, unique[i], &v)?;
                    }
                    vectors[i] = Some(v);
                }
            }
        }

        let mut out = Array2::zeros((sentences.len(), self.dimension));
        for (row, s) in sentences.iter().enumerate() {
            let v = vectors[index[s.as_str()]].as_ref().expect("every unique text resolved");
            out.row_mut(row).assign(&ndarray::ArrayView1::from(v.as_slice()));
        }
        Ok(out)
    }
}
