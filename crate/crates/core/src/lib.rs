//! Unsupervised out-of-domain detection over precomputed utterance
//! embeddings and classifier logits.
//!
//! Scores follow one convention throughout: higher means more likely
//! out-of-domain.

pub mod dataio;
pub mod detectors;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod random;

pub use dataio::{EmbeddingSet, Manifest, Role, SynthSpec};
pub use detectors::{
    decide, Decision, MahaConfig, MahalanobisDetector, MspScorer, ScoreVector, Variant, Verdict,
};
pub use error::{Error, ErrorKind, Result};
pub use geometry::{GeometryReport, TermMatrix};
pub use linalg::Matrix;
pub use metrics::{EvalReport, LabeledScores, Metrics, Positive};
