use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Low instability, low exploration.
    ConvergentResponse,
    /// High instability, low exploration.
    FaithfulFactualRecall,
    /// Low instability, high exploration.
    FaithfulInterpretation,
    /// High instability, high exploration.
    CreativeGeneration,
}

impl Regime {
    pub fn from_axes(instability: Axis, exploration: Axis) -> Self {
        match (instability, exploration) {
            (Axis::Low, Axis::Low) => Regime::ConvergentResponse,
            (Axis::High, Axis::Low) => Regime::FaithfulFactualRecall,
            (Axis::Low, Axis::High) => Regime::FaithfulInterpretation,
            (Axis::High, Axis::High) => Regime::CreativeGeneration,
        }
    }
}

/// Decision thresholds `S*` (instability) and `KL*` (exploration).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub s_star: f64,
    pub kl_star: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { s_star: 0.25, kl_star: 2.0 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.s_star > 0.0 && self.kl_star > 0.0) {
            return Err(format!("thresholds must be positive, got s_star={} kl_star={}", self.s_star, self.kl_star));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticBoxVerdict {
    pub instability_axis: Axis,
    pub exploration_axis: Axis,
    pub regime: Regime,
    pub thresholds: Thresholds,
    pub s_h: f64,
    pub kl_score: f64,
}

impl SemanticBoxVerdict {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("verdict serializes");
        s.push('\n');
        s
    }
}

/// Places a run in the semantic box. An axis is `High` only when its score
/// strictly exceeds the threshold.
pub fn classify_semantic_box(s_h: f64, kl_score: f64, thresholds: Thresholds) -> SemanticBoxVerdict {
    let axis = |v: f64, t: f64| if v > t { Axis::High } else { Axis::Low };
    let instability_axis = axis(s_h, thresholds.s_star);
    let exploration_axis = axis(kl_score, thresholds.kl_star);
    SemanticBoxVerdict {
        instability_axis,
        exploration_axis,
        regime: Regime::from_axes(instability_axis, exploration_axis),
        thresholds,
        s_h,
        kl_score,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forced_hallucination_is_convergent() {
        let v = classify_semantic_box(0.1100, 0.0154, Thresholds::default());
        assert_eq!(v.regime, Regime::ConvergentResponse);
    }

    #[test]
    fn agi_dilemma_is_creative() {
        let v = classify_semantic_box(0.5919, 19.5591, Thresholds::default());
        assert_eq!(v.regime, Regime::CreativeGeneration);
    }

    #[test]
    fn boundaries_are_low() {
        let t = Thresholds::default();
        let v = classify_semantic_box(t.s_star, t.kl_star, t);
        assert_eq!((v.instability_axis, v.exploration_axis), (Axis::Low, Axis::Low));
    }

    #[test]
    fn all_four_regimes() {
        let t = Thresholds { s_star: 1.0, kl_star: 1.0 };
        assert_eq!(classify_semantic_box(2.0, 0.5, t).regime, Regime::FaithfulFactualRecall);
        assert_eq!(classify_semantic_box(0.5, 2.0, t).regime, Regime::FaithfulInterpretation);
    }

    #[test]
    fn verdict_json_names() {
        let json = classify_semantic_box(0.3, 0.1, Thresholds::default()).to_json();
        assert!(json.contains("\"regime\": \"FaithfulFactualRecall\""));
        assert!(json.contains("\"s_star\": 0.25"));
    }

    proptest! {
        #[test]
        fn monotone_axes(s in 0.0..2.0f64, k in 0.0..20.0f64, ds in 0.0..1.0f64, dk in 0.0..5.0f64) {
            let t = Thresholds::default();
            let a = classify_semantic_box(s, k, t);
            let b = classify_semantic_box(s + ds, k + dk, t);
            prop_assert!(!(a.instability_axis == Axis::High && b.instability_axis == Axis::Low));
            prop_assert!(!(a.exploration_axis == Axis::High && b.exploration_axis == Axis::Low));
        }
    }
}
