//! Good/bad classification of a best parse from its penalty score.
//!
//! Two tests, either of which marks the parse bad: the combined penalty
//! against an absolute cap, and the per-word penalty against a rate cap.
//! The second catches short inputs whose absolute score looks harmless.

use serde::{Deserialize, Serialize};

use crate::num::Score;
use crate::scoring::PenaltyBreakdown;

/// Tunable cutoffs; both default to values that pass a clean one-fragment
/// parse (combined 1.1) with room to spare.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "")]
pub struct QualityThresholds<S: Score = f64> {
    /// Maximum combined penalty before the parse is bad outright.
    pub t_abs: S,
    /// Maximum combined penalty per input word.
    pub t_rel: S,
}

impl<S: Score> Default for QualityThresholds<S> {
    fn default() -> Self {
        Self { t_abs: S::from_f64_lossy(5.0), t_rel: S::from_f64_lossy(0.35) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Good,
    Bad,
}

/// Classification with the specific rule violations that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityLabel {
    pub label: Verdict,
    /// Empty exactly when the label is good.
    pub reasons: Vec<String>,
}

impl QualityLabel {
    pub fn is_good(&self) -> bool {
        self.label == Verdict::Good
    }
}

/// Classify a best parse. `n` is the input length in words.
pub fn classify<S: Score>(
    breakdown: &PenaltyBreakdown<S>,
    n: usize,
    th: &QualityThresholds<S>,
) -> QualityLabel {
    assert!(n >= 1, "classification needs a nonempty sentence");
    let mut reasons = Vec::new();
    if breakdown.combined > th.t_abs {
        reasons.push(format!(
            "combined penalty {} exceeds the absolute threshold {}",
            breakdown.combined, th.t_abs
        ));
    }
    let per_word = breakdown.combined / S::from_f64_lossy(n as f64);
    if per_word > th.t_rel {
        reasons.push(format!(
            "per-word penalty {} over {} words exceeds the relative threshold {}",
            per_word, n, th.t_rel
        ));
    }
    let label = if reasons.is_empty() { Verdict::Good } else { Verdict::Bad };
    QualityLabel { label, reasons }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{combine, FeatureWeights};
    use std::collections::BTreeSet;

    fn breakdown_with(combined: f64) -> PenaltyBreakdown {
        // Zero everything except a synthetic stat penalty summing to the
        // target; classify only reads `combined`.
        let w = FeatureWeights { w_stat: 1.0, ..FeatureWeights::default() };
        combine(&BTreeSet::new(), 0, 0, -combined, 10, &w)
    }

    fn th() -> QualityThresholds {
        QualityThresholds::default()
    }

    #[test]
    fn reference_classifications() {
        assert!(classify(&breakdown_with(1.2), 6, &th()).is_good());

        let long_bad = classify(&breakdown_with(6.0), 20, &th());
        assert_eq!(long_bad.label, Verdict::Bad);
        assert_eq!(long_bad.reasons.len(), 1, "{:?}", long_bad.reasons);
        assert!(long_bad.reasons[0].contains("absolute"));

        let short_bad = classify(&breakdown_with(2.0), 4, &th());
        assert_eq!(short_bad.label, Verdict::Bad);
        assert_eq!(short_bad.reasons.len(), 1, "{:?}", short_bad.reasons);
        assert!(short_bad.reasons[0].contains("relative"));
    }

    #[test]
    fn clean_single_fragment_parse_is_good() {
        let b = combine(&BTreeSet::new(), 0, 1, 0.0, 6, &FeatureWeights::default());
        assert_eq!(b.combined, 1.1);
        assert!(classify(&b, 6, &th()).is_good());
    }

    #[test]
    fn both_rules_can_fire_at_once() {
        let label = classify(&breakdown_with(9.0), 3, &th());
        assert_eq!(label.reasons.len(), 2);
    }

    #[test]
    fn raising_thresholds_never_flips_good_to_bad() {
        // Deterministic pseudo-random sweep over (combined, n, thresholds).
        let mut x = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let combined = next() * 12.0;
            let n = 1 + (next() * 30.0) as usize;
            let t1 = QualityThresholds { t_abs: next() * 8.0, t_rel: next() };
            let t2 = QualityThresholds { t_abs: t1.t_abs + next(), t_rel: t1.t_rel + next() };
            let b = breakdown_with(combined);
            if classify(&b, n, &t1).is_good() {
                assert!(classify(&b, n, &t2).is_good(), "combined {combined} n {n}");
            }
        }
    }

    #[test]
    fn labels_serialize_lowercase() {
        let good = classify(&breakdown_with(0.5), 8, &th());
        let v = serde_json::to_value(&good).unwrap();
        assert_eq!(v["label"], "good");
        assert_eq!(v["reasons"], serde_json::json!([]));
    }
}
