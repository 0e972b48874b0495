use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::ProviderConfig;
use crate::diagnostics::Thresholds;
use crate::metrics::MetricOptions;
use crate::textproc::EmbeddingProviderConfig;
use crate::topics::ClusterOptions;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("environment variable {0} referenced in the config is not set")]
    MissingVar(String),

    #[error("unterminated ${{...}} reference at byte {0}")]
    Unterminated(usize),

    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },

    #[error("invalid config: {0}")]
    Parse(String),

    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsOptions {
    pub s_star: f64,
    pub kl_star: f64,
    /// Cosine similarity at which two whole answers count as equivalent for
    /// the semantic entropy baseline.
    pub se_threshold: f64,
    pub semantic_entropy: bool,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        let t = Thresholds::default();
        Self { s_star: t.s_star, kl_star: t.kl_star, se_threshold: 0.92, semantic_entropy: true }
    }
}

impl DiagnosticsOptions {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds { s_star: self.s_star, kl_star: self.kl_star }
    }
}

/// Full configuration of one run. Every field has a default; the defaults
/// reproduce the reference protocol (10 paraphrases, 4 answers each, weights
/// 0.7 / 0.3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Inline prompt text.
    pub prompt: Option<String>,
    /// File holding the prompt; relative paths resolve against the config
    /// file's directory.
    pub prompt_file: Option<PathBuf>,
    pub m_paraphrases: usize,
    pub n_answers: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub provider: ProviderConfig,
    pub embedding: EmbeddingProviderConfig,
    pub clustering: ClusterOptions,
    pub metrics: MetricOptions,
    pub diagnostics: DiagnosticsOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            prompt: None,
            prompt_file: None,
            m_paraphrases: 10,
            n_answers: 4,
            seed: 0,
            output_dir: PathBuf::from("runs"),
            provider: ProviderConfig::default(),
            embedding: EmbeddingProviderConfig::default(),
            clustering: ClusterOptions::default(),
            metrics: MetricOptions::default(),
            diagnostics: DiagnosticsOptions::default(),
        }
    }
}

/// Replaces every `${NAME}` with `lookup(NAME)`; `$$` escapes a dollar sign.
pub fn interpolate(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, ConfigError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut offset = 0;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        if let Some(tail) = after.strip_prefix('$') {
            out.push('$');
            offset += pos + 2;
            rest = tail;
        } else if let Some(body) = after.strip_prefix('{') {
            let end = body.find('}').ok_or(ConfigError::Unterminated(offset + pos))?;
            let name = &body[..end];
            out.push_str(&lookup(name).ok_or_else(|| ConfigError::MissingVar(name.to_string()))?);
            offset += pos + 2 + end + 1;
            rest = &body[end + 1..];
        } else {
            out.push('$');
            offset += pos + 1;
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

impl RunConfig {
    /// Parses TOML after `${VAR}` interpolation through `lookup`.
    pub fn from_toml_str(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let text = interpolate(text, lookup)?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    /// Loads a config file, interpolating from the process environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.to_path_buf(), message: e.to_string() })?;
        let mut cfg = Self::from_toml_str(&text, |name| std::env::var(name).ok())?;
        if let (Some(file), Some(dir)) = (&cfg.prompt_file, path.parent()) {
            if file.is_relative() {
                cfg.prompt_file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.m_paraphrases < 1 || self.n_answers < 1 {
            return invalid("m_paraphrases and n_answers must be at least 1".into());
        }
        if self.prompt.is_some() && self.prompt_file.is_some() {
            return invalid("set either prompt or prompt_file, not both".into());
        }
        self.provider.validate().map_err(ConfigError::Invalid)?;
        self.embedding.validate().map_err(ConfigError::Invalid)?;
        self.metrics.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.diagnostics.thresholds().validate().map_err(ConfigError::Invalid)?;
        let t = self.diagnostics.se_threshold;
        if !(t > -1.0 && t <= 1.0) {
            return invalid(format!("se_threshold must lie in (-1, 1], got {t}"));
        }
        if self.clustering.k_min < 1 {
            return invalid("clustering.k_min must be at least 1".into());
        }
        Ok(())
    }

    /// The prompt text, from `prompt` or `prompt_file`.
    pub fn prompt_text(&self) -> Result<String, ConfigError> {
        match (&self.prompt, &self.prompt_file) {
            (Some(p), None) => Ok(p.clone()),
            (None, Some(path)) => std::fs::read_to_string(path)
                .map(|s| s.trim().to_string())
                .map_err(|e| ConfigError::Read { path: path.clone(), message: e.to_string() }),
            (None, None) => Err(ConfigError::Invalid("no prompt given (prompt or prompt_file)".into())),
            (Some(_), Some(_)) => Err(ConfigError::Invalid("set either prompt or prompt_file, not both".into())),
        }
    }

    /// Clustering options with the run seed applied.
    pub fn cluster_options(&self) -> ClusterOptions {
        ClusterOptions { seed: self.seed, ..self.clustering.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(name: &str) -> Option<String> {
        match name {
            "KEY_VAR" => Some("MY_KEY".into()),
            "HOST" => Some("localhost:9000".into()),
            _ => None,
        }
    }

    #[test]
    fn defaults_are_the_reference_protocol() {
        let cfg = RunConfig::from_toml_str("", env).unwrap();
        assert_eq!((cfg.m_paraphrases, cfg.n_answers), (10, 4));
        assert_eq!((cfg.metrics.w_jsd, cfg.metrics.w_wass), (0.7, 0.3));
        assert_eq!(cfg.diagnostics.thresholds(), Thresholds { s_star: 0.25, kl_star: 2.0 });
    }

    #[test]
    fn interpolation() {
        assert_eq!(interpolate("a ${HOST} b $$x $y", env).unwrap(), "a localhost:9000 b $x $y");
        assert_eq!(interpolate("${NOPE}", env), Err(ConfigError::MissingVar("NOPE".into())));
        assert!(matches!(interpolate("x ${HOST", env), Err(ConfigError::Unterminated(2))));
    }

    #[test]
    fn parses_sections() {
        let text = r#"
            prompt = "Explain tides."
            m_paraphrases = 3
            seed = 7

            [provider]
            endpoint_url = "http://${HOST}/v1/chat/completions"
            api_key_ref = "${KEY_VAR}"

            [embedding]
            backend = "hashing"
            dimension = 128

            [clustering]
            k = 3

            [diagnostics]
            s_star = 0.3
        "#;
        let cfg = RunConfig::from_toml_str(text, env).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.provider.endpoint_url, "http://localhost:9000/v1/chat/completions");
        assert_eq!(cfg.provider.api_key_ref.as_deref(), Some("MY_KEY"));
        assert_eq!(cfg.cluster_options().seed, 7);
        assert_eq!(cfg.cluster_options().k, Some(3));
        assert_eq!(cfg.diagnostics.s_star, 0.3);
        assert_eq!(cfg.prompt_text().unwrap(), "Explain tides.");
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(RunConfig::from_toml_str("bogus = 1", env), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::from_toml_str("[clustering]\nseed = 1", env), Err(ConfigError::Parse(_))));
        let cfg = RunConfig::from_toml_str("[metrics]\nw_jsd = 0.5", env).unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
        let cfg = RunConfig::from_toml_str("n_answers = 0", env).unwrap();
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().prompt_text().is_err());
    }
}
