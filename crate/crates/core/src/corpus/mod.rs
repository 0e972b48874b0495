//! Paraphrase/answer ensemble generation and bundle persistence.
//!
//! A [`RunBundle`] is the raw material of one experiment: the original
//! prompt, `M` paraphrases (entry 0 is always the original prompt itself),
//! and an `M x N` grid of sampled answers. Bundles are produced through a
//! [`ChatProvider`] and can be stored as JSONL and replayed offline.

mod bundle_io;
mod provider;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use bundle_io::{load_bundle, save_bundle, write_bundle, BUNDLE_SCHEMA};
pub use provider::{ChatMessage, ChatProvider, ChatRequest, EchoChat, OpenAiChat, ScriptedChat, Slot};

use crate::parallel::try_map_indexed;
use crate::ProviderError;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error("paraphrase {index} was degenerate twice (empty or an echo of the instruction)")]
    DegenerateParaphrase { index: usize },

    #[error("answer ({m}, {n}) was empty twice")]
    EmptyAnswer { m: usize, n: usize },

    #[error("invalid bundle: {0}")]
    Invalid(String),

    #[error("bundle i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bundle schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// Meaning-preserving rewrite instruction sent for paraphrases 1..M-1.
///
/// The template is pinned per version so that stored runs stay comparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParaphraseTemplate {
    #[default]
    V1,
}

impl ParaphraseTemplate {
    pub fn text(self) -> &'static str {
        match self {
            ParaphraseTemplate::V1 => {
                "Rewrite the following text preserving its exact meaning, length, and any \
                 output-format instructions. Reply with the rewritten text only.\n\n{text}"
            }
        }
    }

    pub fn render(self, text: &str) -> String {
        self.text().replace("{text}", text)
    }
}

/// Settings for the chat-completion provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// Full URL of an OpenAI-compatible `chat/completions` endpoint.
    pub endpoint_url: String,
    /// Name of the environment variable that holds the API key, if any.
    pub api_key_ref: Option<String>,
    pub model_id: String,
    pub answer_temperature: f64,
    pub paraphrase_temperature: f64,
    pub max_parallel_requests: usize,
    pub retry_budget: u32,
    pub paraphrase_template: ParaphraseTemplate,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".to_string(),
            api_key_ref: Some("OPENAI_API_KEY".to_string()),
            model_id: "gpt-4o".to_string(),
            answer_temperature: 1.0,
            paraphrase_temperature: 0.9,
            max_parallel_requests: 4,
            retry_budget: 3,
            paraphrase_template: ParaphraseTemplate::V1,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_parallel_requests < 1 {
            return Err("max_parallel_requests must be at least 1".into());
        }
        if !(self.answer_temperature >= 0.0) || !(self.paraphrase_temperature >= 0.0) {
            return Err("temperatures must be non-negative".into());
        }
        if self.model_id.trim().is_empty() {
            return Err("model_id must not be empty".into());
        }
        Ok(())
    }
}

/// One complete experiment: original prompt, `M` paraphrases and the
/// `M x N` answer grid.
///
/// Construction validates the shape, so every `RunBundle` in hand has at
/// least one paraphrase, rectangular non-empty answers, and
/// `paraphrases[0] == original_prompt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunBundle {
    original_prompt: String,
    paraphrases: Vec<String>,
    answers: Vec<Vec<String>>,
    model_id: String,
    sampling_temperature: f64,
    created_at: DateTime<Utc>,
    provider_trace: serde_json::Value,
}

impl RunBundle {
    pub fn new(
        paraphrases: Vec<String>,
        answers: Vec<Vec<String>>,
        model_id: impl Into<String>,
        sampling_temperature: f64,
        created_at: DateTime<Utc>,
        provider_trace: serde_json::Value,
    ) -> Result<Self, CorpusError> {
        if paraphrases.is_empty() {
            return Err(CorpusError::Invalid("a bundle needs at least one paraphrase".into()));
        }
        if let Some(i) = paraphrases.iter().position(|p| p.trim().is_empty()) {
            return Err(CorpusError::Invalid(format!("paraphrase {i} is empty")));
        }
        if answers.len() != paraphrases.len() {
            return Err(CorpusError::Invalid(format!(
                "{} answer rows for {} paraphrases",
                answers.len(),
                paraphrases.len()
            )));
        }
        let n = answers[0].len();
        if n == 0 {
            return Err(CorpusError::Invalid("answer rows must be non-empty".into()));
        }
        for (m, row) in answers.iter().enumerate() {
            if row.len() != n {
                return Err(CorpusError::Invalid(format!(
                    "ragged answer grid: row {m} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|a| a.trim().is_empty()) {
                return Err(CorpusError::Invalid(format!("answer ({m}, {j}) is empty")));
            }
        }
        Ok(Self {
            original_prompt: paraphrases[0].clone(),
            paraphrases,
            answers,
            model_id: model_id.into(),
            sampling_temperature,
            created_at,
            provider_trace,
        })
    }

    pub fn original_prompt(&self) -> &str {
        &self.original_prompt
    }

    pub fn paraphrases(&self) -> &[String] {
        &self.paraphrases
    }

    pub fn answers(&self) -> &[Vec<String>] {
        &self.answers
    }

    pub fn answer(&self, m: usize, n: usize) -> &str {
        &self.answers[m][n]
    }

    /// Number of paraphrases, `M`.
    pub fn m(&self) -> usize {
        self.paraphrases.len()
    }

    /// Answers per paraphrase, `N`.
    pub fn n(&self) -> usize {
        self.answers[0].len()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn sampling_temperature(&self) -> f64 {
        self.sampling_temperature
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn provider_trace(&self) -> &serde_json::Value {
        &self.provider_trace
    }
}

fn is_degenerate_paraphrase(out: &str, instruction: &str, template: ParaphraseTemplate) -> bool {
    let out = out.trim();
    out.is_empty() || out == instruction.trim() || out == template.text().trim()
}

/// Produces `m` paraphrases of `prompt`; entry 0 is `prompt` itself.
pub fn generate_paraphrases(
    prompt: &str,
    m: usize,
    cfg: &ProviderConfig,
    provider: &dyn ChatProvider,
) -> Result<Vec<String>, CorpusError> {
    if prompt.trim().is_empty() {
        return Err(CorpusError::Invalid("prompt must not be empty".into()));
    }
    if m == 0 {
        return Err(CorpusError::Invalid("m must be at least 1".into()));
    }
    let instruction = cfg.paraphrase_template.render(prompt);
    let indices: Vec<usize> = (1..m).collect();
    let rewrites = try_map_indexed(&indices, cfg.max_parallel_requests, |_, &index| {
        for attempt in 0..2 {
            let request = ChatRequest {
                model: cfg.model_id.clone(),
                messages: vec![ChatMessage::user(instruction.clone())],
                temperature: cfg.paraphrase_temperature,
                slot: Slot::Paraphrase { index, attempt },
                source: prompt.to_string(),
            };
            let out = provider.complete(&request)?;
            if !is_degenerate_paraphrase(&out, &instruction, cfg.paraphrase_template) {
                return Ok(out.trim().to_string());
            }
            log::warn!("paraphrase {index} attempt {attempt} was degenerate");
        }
        Err(CorpusError::DegenerateParaphrase { index })
    })?;

    let mut out = Vec::with_capacity(m);
    out.push(prompt.to_string());
    out.extend(rewrites);
    Ok(out)
}

/// Samples `n` answers for every paraphrase and assembles the bundle.
///
/// The grid is either complete or the call fails; a partial grid is never
/// returned.
pub fn generate_answers(
    paraphrases: &[String],
    n: usize,
    cfg: &ProviderConfig,
    provider: &dyn ChatProvider,
) -> Result<RunBundle, CorpusError> {
    if paraphrases.is_empty() {
        return Err(CorpusError::Invalid("paraphrases must not be empty".into()));
    }
    if n == 0 {
        return Err(CorpusError::Invalid("n must be at least 1".into()));
    }
    let cells: Vec<(usize, usize)> =
        (0..paraphrases.len()).flat_map(|m| (0..n).map(move |j| (m, j))).collect();
    let flat = try_map_indexed(&cells, cfg.max_parallel_requests, |_, &(m, j)| {
        for attempt in 0..2 {
            let request = ChatRequest {
                model: cfg.model_id.clone(),
                messages: vec![ChatMessage::user(paraphrases[m].clone())],
                temperature: cfg.answer_temperature,
                slot: Slot::Answer { m, n: j, attempt },
                source: paraphrases[m].clone(),
            };
            let out = provider.complete(&request)?;
            if !out.trim().is_empty() {
                return Ok(out.trim().to_string());
            }
        }
        Err(CorpusError::EmptyAnswer { m, n: j })
    })?;

    let mut answers = Vec::with_capacity(paraphrases.len());
    let mut it = flat.into_iter();
    for _ in 0..paraphrases.len() {
        answers.push(it.by_ref().take(n).collect());
    }
    RunBundle::new(
        paraphrases.to_vec(),
        answers,
        cfg.model_id.clone(),
        cfg.answer_temperature,
        Utc::now(),
        provider.trace(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn cfg() -> ProviderConfig {
        ProviderConfig { max_parallel_requests: 3, ..Default::default() }
    }

    fn hash_suffix() -> ScriptedChat<impl Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync> {
        ScriptedChat::new(|req: &ChatRequest| {
            Ok(match req.slot {
                Slot::Paraphrase { index, .. } => format!("{}#{index}", req.source),
                Slot::Answer { m, n, .. } => format!("ans({m},{n})"),
            })
        })
    }

    #[test]
    fn single_paraphrase_is_the_prompt_and_makes_no_call() {
        let calls = AtomicUsize::new(0);
        let provider = ScriptedChat::new(|_: &ChatRequest| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok("x".to_string())
        });
        let out = generate_paraphrases("p", 1, &cfg(), &provider).unwrap();
        assert_eq!(out, vec!["p"]);
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn mock_paraphrases_keep_order() {
        let out = generate_paraphrases("p", 3, &cfg(), &hash_suffix()).unwrap();
        assert_eq!(out, vec!["p", "p#1", "p#2"]);
    }

    #[test]
    fn ten_paraphrases() {
        let out = generate_paraphrases("Summarize the Hubble Space Telescope.", 10, &cfg(), &hash_suffix()).unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(out[0], "Summarize the Hubble Space Telescope.");
    }

    #[test]
    fn degenerate_paraphrase_is_retried_once() {
        let provider = ScriptedChat::new(|req: &ChatRequest| match req.slot {
            Slot::Paraphrase { attempt: 0, .. } => Ok("   ".to_string()),
            _ => Ok("reworded".to_string()),
        });
        let out = generate_paraphrases("p", 2, &cfg(), &provider).unwrap();
        assert_eq!(out, vec!["p", "reworded"]);
    }

    #[test]
    fn degenerate_paraphrase_twice_aborts() {
        let template = ParaphraseTemplate::V1;
        let provider = ScriptedChat::new(move |req: &ChatRequest| Ok(template.render(&req.source)));
        let err = generate_paraphrases("p", 3, &cfg(), &provider).unwrap_err();
        assert!(matches!(err, CorpusError::DegenerateParaphrase { .. }), "{err}");
    }

    #[test]
    fn answer_grid_is_row_major() {
        let paraphrases = vec!["a".to_string(), "b".to_string()];
        let bundle = generate_answers(&paraphrases, 3, &cfg(), &hash_suffix()).unwrap();
        assert_eq!((bundle.m(), bundle.n()), (2, 3));
        assert_eq!(bundle.answer(0, 0), "ans(0,0)");
        assert_eq!(bundle.answer(1, 2), "ans(1,2)");
        assert_eq!(bundle.answers()[1], vec!["ans(1,0)", "ans(1,1)", "ans(1,2)"]);
    }

    #[test]
    fn minimal_grid() {
        let bundle = generate_answers(&["q".to_string()], 1, &cfg(), &EchoChat).unwrap();
        assert_eq!((bundle.m(), bundle.n()), (1, 1));
        assert_eq!(bundle.answer(0, 0), "q");
    }

    #[test]
    fn reference_protocol_grid() {
        let paraphrases: Vec<String> = (0..10).map(|i| format!("prompt {i}")).collect();
        let bundle = generate_answers(&paraphrases, 4, &cfg(), &hash_suffix()).unwrap();
        assert_eq!(bundle.answers().iter().map(Vec::len).sum::<usize>(), 40);
    }

    #[test]
    fn provider_failure_returns_no_grid() {
        let provider = ScriptedChat::new(|req: &ChatRequest| match req.slot {
            Slot::Answer { m: 1, n: 1, .. } => Err(ProviderError::BadResponse("boom".into())),
            _ => Ok("fine".to_string()),
        });
        let paraphrases = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            generate_answers(&paraphrases, 2, &cfg(), &provider),
            Err(CorpusError::Provider(_))
        ));
    }

    #[test]
    fn bundle_rejects_ragged_grid() {
        let err = RunBundle::new(
            vec!["a".into(), "b".into()],
            vec![vec!["x".into()], vec!["y".into(), "z".into()]],
            "m",
            1.0,
            Utc::now(),
            serde_json::Value::Null,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::Invalid(_)));
    }
}
