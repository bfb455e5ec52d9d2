//! Embedding sets, file formats, manifests, the synthetic generator and
//! train-fraction subsampling.

mod container;
mod manifest;
mod subsample;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use container::{
    decode_container, encode_container, read_container, read_embeddings, read_embeddings_as,
    sidecar_path, write_container, write_embeddings, write_set, Container, ContentKind,
    SidecarMeta, CONTAINER_MAGIC, CONTAINER_VERSION, HEADER_LEN,
};
pub use manifest::{FileKey, Manifest, Run, MANIFEST_FORMAT};
pub use subsample::subsample_fraction;
pub use synth::{generate_synthetic, OodMode, SynthData, SynthSpec};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    ValId,
    ValOod,
    TestId,
    TestOod,
}

impl Role {
    pub fn is_ood(self) -> bool {
        matches!(self, Role::ValOod | Role::TestOod)
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::ValId => "val_id",
            Role::ValOod => "val_ood",
            Role::TestId => "test_id",
            Role::TestOod => "test_ood",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Stacked utterance vectors (or logits) for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub matrix: Matrix,
    pub labels: Option<Vec<u32>>,
    pub role: Role,
    pub source: String,
}

impl EmbeddingSet {
    pub fn new(
        matrix: Matrix,
        labels: Option<Vec<u32>>,
        role: Role,
        source: impl Into<String>,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != matrix.rows() {
                return Err(Error::DimensionMismatch { expected: matrix.rows(), found: l.len() });
            }
            if role.is_ood() {
                return Err(Error::data(format!("{role} rows must not carry class labels")));
            }
        } else if role == Role::Train {
            return Err(Error::data("training rows need class labels"));
        }
        Ok(EmbeddingSet { matrix, labels, role, source: source.into() })
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn labels_usize(&self) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|l| l.iter().map(|&c| c as usize).collect())
    }

    /// `max label + 1`, or 0 without labels.
    pub fn num_classes(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().max()).map_or(0, |&m| m as usize + 1)
    }

    /// Row indices per class, in row order.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_classes()];
        if let Some(labels) = &self.labels {
            for (i, &c) in labels.iter().enumerate() {
                members[c as usize].push(i);
            }
        }
        members
    }

    pub fn select(&self, rows: &[usize]) -> EmbeddingSet {
        EmbeddingSet {
            matrix: self.matrix.select_rows(rows),
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect()),
            role: self.role,
            source: self.source.clone(),
        }
    }
}
