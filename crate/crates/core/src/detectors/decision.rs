use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
}

/// Thresholded outcome for one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub score: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Rejects when `score >= threshold`; the boundary itself is rejected.
pub fn decide(score: f64, threshold: f64) -> Decision {
    let verdict = if score >= threshold { Verdict::Reject } else { Verdict::Accept };
    Decision { score, threshold, verdict }
}
