use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scores::{kl_score, phi_score, s_h_score};

pub const REPORT_SCHEMA: &str = "sdm_report_v1";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report schema {found:?} is not {expected:?}")]
    Schema { expected: String, found: String },

    #[error("stored {field} = {stored:?} but components give {recomputed:?}")]
    Inconsistent { field: &'static str, stored: Option<f64>, recomputed: Option<f64> },

    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
}

/// Raw inputs to [`MetricsReport::assemble`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct Components {
    pub k: usize,
    pub prompt_sentences: usize,
    pub answer_sentences: usize,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
    pub h_prompt: f64,
    pub h_answer: f64,
    pub global_jsd: f64,
    pub global_kl_pa: f64,
    pub global_kl_ap: f64,
    pub ensemble_jsd: f64,
    pub ensemble_kl_ap: f64,
    pub ensemble_kl_pa: f64,
    pub averaged_mi: f64,
    pub ensemble_mi: f64,
    pub ensemble_cond_entropy: f64,
    pub wasserstein: f64,
    pub epsilon: f64,
    pub w_jsd: f64,
    pub w_wass: f64,
}

/// Flat record of every metric of a run. Entropies and divergences are in
/// bits.
///
/// The three final scores are `None` when the prompt-topic entropy is zero
/// (a single prompt topic), since they are undefined there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub k: usize,
    pub prompt_sentences: usize,
    pub answer_sentences: usize,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
    pub h_prompt: f64,
    pub h_answer: f64,
    pub entropy_diff: f64,
    pub global_jsd: f64,
    pub global_kl_pa: f64,
    pub global_kl_ap: f64,
    pub ensemble_jsd: f64,
    pub ensemble_kl_ap: f64,
    pub ensemble_kl_pa: f64,
    pub averaged_mi: f64,
    pub ensemble_mi: f64,
    pub ensemble_cond_entropy: f64,
    pub wasserstein: f64,
    pub phi: Option<f64>,
    pub s_h: Option<f64>,
    pub kl_score: Option<f64>,
    pub w_jsd: f64,
    pub w_wass: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub se_original: Option<f64>,
    #[serde(default)]
    pub se_mean: Option<f64>,
}

type Row = (&'static str, fn(&MetricsReport) -> Option<f64>);

/// Comparison-table rows, in their fixed order.
pub const CANONICAL_ROWS: &[Row] = &[
    ("SDM Score S_H", |r| r.s_h),
    ("Norm. Cond. Entropy Phi", |r| r.phi),
    ("Global Prompt Entropy H(P)", |r| Some(r.h_prompt)),
    ("Global JSD", |r| Some(r.global_jsd)),
    ("Global KL(P || A)", |r| Some(r.global_kl_pa)),
    ("Global KL(A || P)", |r| Some(r.global_kl_ap)),
    ("Entropy Difference H(A) - H(P)", |r| Some(r.entropy_diff)),
    ("Ensemble JSD", |r| Some(r.ensemble_jsd)),
    ("Ensemble KL(A || P) / H(P)", |r| r.kl_score),
    ("Wasserstein Distance", |r| Some(r.wasserstein)),
    ("Ensemble MI (bits)", |r| Some(r.ensemble_mi)),
    ("Averaged MI (bits)", |r| Some(r.averaged_mi)),
    ("SE (Original Prompt Only)", |r| r.se_original),
    ("Mean SE (Across Paraphrases)", |r| r.se_mean),
];

impl MetricsReport {
    pub(crate) fn assemble(c: Components) -> Self {
        let mut r = Self {
            schema: REPORT_SCHEMA.to_string(),
            k: c.k,
            prompt_sentences: c.prompt_sentences,
            answer_sentences: c.answer_sentences,
            pairs_used: c.pairs_used,
            pairs_skipped: c.pairs_skipped,
            h_prompt: c.h_prompt,
            h_answer: c.h_answer,
            entropy_diff: c.h_answer - c.h_prompt,
            global_jsd: c.global_jsd,
            global_kl_pa: c.global_kl_pa,
            global_kl_ap: c.global_kl_ap,
            ensemble_jsd: c.ensemble_jsd,
            ensemble_kl_ap: c.ensemble_kl_ap,
            ensemble_kl_pa: c.ensemble_kl_pa,
            averaged_mi: c.averaged_mi,
            ensemble_mi: c.ensemble_mi,
            ensemble_cond_entropy: c.ensemble_cond_entropy,
            wasserstein: c.wasserstein,
            phi: None,
            s_h: None,
            kl_score: None,
            w_jsd: c.w_jsd,
            w_wass: c.w_wass,
            epsilon: c.epsilon,
            se_original: None,
            se_mean: None,
        };
        let (phi, s_h, kl) = r.recompute_finals();
        r.phi = phi;
        r.s_h = s_h;
        r.kl_score = kl;
        r
    }

    fn recompute_finals(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        (
            phi_score(self.h_answer, self.ensemble_mi, self.h_prompt).ok(),
            s_h_score(self.ensemble_jsd, self.wasserstein, self.h_prompt, self.w_jsd, self.w_wass).ok(),
            kl_score(self.ensemble_kl_ap, self.h_prompt).ok(),
        )
    }

    /// Recomputes the final scores from the stored components and checks
    /// they match the stored values bit for bit.
    pub fn check_consistency(&self) -> Result<(), ReportError> {
        let (phi, s_h, kl) = self.recompute_finals();
        let same = |a: Option<f64>, b: Option<f64>| a.map(f64::to_bits) == b.map(f64::to_bits);
        for (field, stored, recomputed) in [("phi", self.phi, phi), ("s_h", self.s_h, s_h), ("kl_score", self.kl_score, kl)] {
            if !same(stored, recomputed) {
                return Err(ReportError::Inconsistent { field, stored, recomputed });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parses a report and rejects other schema versions.
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("schema").and_then(|v| v.as_str()).unwrap_or("").to_string();
        if found != REPORT_SCHEMA {
            return Err(ReportError::Schema { expected: REPORT_SCHEMA.into(), found });
        }
        Ok(serde_json::from_value(value)?)
    }

    /// `metric,value` lines in field order; undefined values are empty.
    pub fn to_csv(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = String::from("metric,value\n");
        if let serde_json::Value::Object(map) = value {
            for (key, v) in map {
                let cell = match v {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                let _ = writeln!(out, "{key},{cell}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> MetricsReport {
        MetricsReport::assemble(Components {
            k: 3,
            prompt_sentences: 20,
            answer_sentences: 120,
            pairs_used: 10,
            pairs_skipped: 0,
            h_prompt: 1.9165,
            h_answer: 2.0014,
            global_jsd: 0.3337,
            global_kl_pa: 0.4185,
            global_kl_ap: 0.5241,
            ensemble_jsd: 0.4492,
            ensemble_kl_ap: 13.701,
            ensemble_kl_pa: 3.2,
            averaged_mi: 0.0023,
            ensemble_mi: 0.0174,
            ensemble_cond_entropy: 1.984,
            wasserstein: 0.8162,
            epsilon: 1e-6,
            w_jsd: 0.7,
            w_wass: 0.3,
        })
    }

    #[test]
    fn finals_are_filled_and_consistent() {
        let r = sample();
        assert!((r.s_h.unwrap() - 0.2918).abs() < 5e-4);
        r.check_consistency().unwrap();
    }

    #[test]
    fn tampering_is_detected() {
        let mut r = sample();
        r.wasserstein += 1e-12;
        assert!(matches!(r.check_consistency(), Err(ReportError::Inconsistent { field: "s_h", .. })));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = sample();
        let back = MetricsReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        back.check_consistency().unwrap();
    }

    #[test]
    fn schema_mismatch() {
        let text = sample().to_json().replace(REPORT_SCHEMA, "sdm_report_v0");
        assert!(matches!(MetricsReport::from_json(&text), Err(ReportError::Schema { .. })));
    }

    #[test]
    fn csv_has_every_field() {
        let csv = sample().to_csv();
        assert!(csv.starts_with("metric,value\nschema,sdm_report_v1\n"));
        assert!(csv.contains("\nse_original,\n"));
        assert_eq!(csv.lines().count(), 1 + 27);
    }
}
