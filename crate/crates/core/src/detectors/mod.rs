//! OOD scoring functions and thresholded decisions.

mod codec;
mod decision;
pub mod llr;
mod mahalanobis;
mod msp;

use serde::{Deserialize, Serialize};

pub use codec::{
    decode_detector, encode_detector, read_detector, write_detector, DETECTOR_MAGIC,
    DETECTOR_VERSION,
};
pub use decision::{decide, Decision, Verdict};
pub use llr::{
    corrupt_corpus, llr_score, ngram_fit, ngram_loglik, tokenize, LlrScorer, NgramLm,
};
pub use mahalanobis::{MahaConfig, MahalanobisDetector, Variant, DEFAULT_EIGEN_FLOOR};
pub use msp::{msp_score, MspScorer};

use crate::dataio::EmbeddingSet;
use crate::error::Result;

/// Per-utterance OOD scores with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub detector: String,
    pub variant: String,
    pub scores: Vec<f64>,
}

/// Fits a Mahalanobis-family detector on a training set.
pub fn fit_mahalanobis(
    train: &EmbeddingSet,
    variant: Variant,
    config: &MahaConfig,
) -> Result<MahalanobisDetector> {
    let labels = train.labels_usize();
    MahalanobisDetector::fit(&train.matrix, labels.as_deref(), variant, config)
}

/// Scores every row of `set`.
pub fn maha_score_set(det: &MahalanobisDetector, set: &EmbeddingSet) -> Result<ScoreVector> {
    Ok(ScoreVector {
        detector: "mahalanobis".into(),
        variant: det.variant().name().into(),
        scores: det.score_batch(&set.matrix)?,
    })
}

/// MSP scores for every row of a logit matrix.
pub fn msp_score_set(scorer: &MspScorer, logits: &EmbeddingSet) -> Result<ScoreVector> {
    use rayon::prelude::*;
    let m = &logits.matrix;
    let scores = (0..m.rows()).into_par_iter().map(|i| scorer.score(m.row(i))).collect::<Result<_>>()?;
    Ok(ScoreVector { detector: "msp".into(), variant: format!("tau={}", scorer.temperature()), scores })
}
