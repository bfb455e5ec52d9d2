//! Dataset manifests.
//!
//! A manifest lists the class names and one or more runs. Each run carries
//! a seed, an optional split id (for datasets whose ID/OOD intent split is
//! random) and the files for that run. Relative paths resolve against the
//! manifest's directory.
//!
//! ```json
//! {
//!   "format": "oodkit-manifest/1",
//!   "dataset": "clinc150",
//!   "classes": ["balance", "bill_due", "..."],
//!   "runs": [
//!     { "seed": 0, "split_id": null,
//!       "files": { "train": "seed-0/train.oode", "test_id": "seed-0/test_id.oode",
//!                  "test_ood": "seed-0/test_ood.oode" } }
//!   ]
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::container::{read_container, read_embeddings_as, ContentKind};
use crate::dataio::{EmbeddingSet, Role};
use crate::detectors::tokenize;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "oodkit-manifest/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKey {
    Train,
    ValId,
    ValOod,
    TestId,
    TestOod,
    ValIdLogits,
    TestIdLogits,
    TestOodLogits,
    TestIdLoglik,
    TestOodLoglik,
    TestIdLoglikBg,
    TestOodLoglikBg,
    TrainText,
    TestIdText,
    TestOodText,
}

impl FileKey {
    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }

    /// Role of the rows in this file.
    pub fn role(self) -> Role {
        use FileKey::*;
        match self {
            Train | TrainText => Role::Train,
            ValId | ValIdLogits => Role::ValId,
            ValOod => Role::ValOod,
            TestId | TestIdLogits | TestIdLoglik | TestIdLoglikBg | TestIdText => Role::TestId,
            TestOod | TestOodLogits | TestOodLoglik | TestOodLoglikBg | TestOodText => {
                Role::TestOod
            }
        }
    }

    pub fn content(self) -> Option<ContentKind> {
        use FileKey::*;
        match self {
            Train | ValId | ValOod | TestId | TestOod => Some(ContentKind::Embeddings),
            ValIdLogits | TestIdLogits | TestOodLogits => Some(ContentKind::Logits),
            TestIdLoglik | TestOodLoglik | TestIdLoglikBg | TestOodLoglikBg => {
                Some(ContentKind::LogLikelihoods)
            }
            TrainText | TestIdText | TestOodText => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub seed: u64,
    #[serde(default)]
    pub split_id: Option<String>,
    pub files: BTreeMap<FileKey, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_format")]
    pub format: String,
    pub dataset: String,
    pub classes: Vec<String>,
    pub runs: Vec<Run>,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_format() -> String {
    MANIFEST_FORMAT.to_owned()
}

impl Manifest {
    pub fn new(dataset: impl Into<String>, classes: Vec<String>, runs: Vec<Run>) -> Self {
        Manifest {
            format: default_format(),
            dataset: dataset.into(),
            classes,
            runs,
            base_dir: PathBuf::new(),
        }
    }

    /// Parses a manifest; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::data(format!("unsupported manifest format {:?}", m.format)));
        }
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::file(path, e))
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }

    pub fn run(&self, seed: u64) -> Result<&Run> {
        self.runs
            .iter()
            .find(|r| r.seed == seed)
            .ok_or_else(|| Error::invalid(format!("manifest has no run with seed {seed}")))
    }

    pub fn path(&self, run: &Run, key: FileKey) -> Option<PathBuf> {
        run.files.get(&key).map(|p| if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
    }

    pub fn require(&self, run: &Run, key: FileKey) -> Result<PathBuf> {
        self.path(run, key).ok_or_else(|| {
            Error::data(format!("run with seed {} has no {} file", run.seed, key.name()))
        })
    }

    /// Loads a container-backed file of a run.
    pub fn load_set(&self, run: &Run, key: FileKey) -> Result<EmbeddingSet> {
        let path = self.require(run, key)?;
        let set = read_embeddings_as(&path, key.role())?;
        if key == FileKey::Train {
            self.check_labels(&set, &path)?;
        }
        Ok(set)
    }

    /// Loads a one-utterance-per-line text file, tokenized.
    pub fn load_text(&self, run: &Run, key: FileKey) -> Result<Vec<Vec<String>>> {
        let path = self.require(run, key)?;
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        Ok(text.lines().map(tokenize).collect())
    }

    /// Checks that every referenced file exists and parses, with a content
    /// kind matching its key, and that training labels are dense in `0..K`.
    pub fn validate(&self) -> Result<()> {
        if self.runs.is_empty() {
            return Err(Error::data("manifest lists no runs"));
        }
        for run in &self.runs {
            for &key in run.files.keys() {
                let path = self.require(run, key)?;
                match key.content() {
                    None => {
                        fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
                    }
                    Some(kind) => {
                        let c = read_container(&path)?;
                        if c.kind != kind {
                            return Err(Error::data(format!(
                                "{}: expected {kind:?} content, found {:?}",
                                path.display(),
                                c.kind
                            )));
                        }
                        if key == FileKey::Train {
                            let set = read_embeddings_as(&path, Role::Train)?;
                            self.check_labels(&set, &path)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_labels(&self, set: &EmbeddingSet, path: &Path) -> Result<()> {
        let k = self.num_classes();
        let members = set.class_members();
        if members.len() > k {
            return Err(Error::data(format!(
                "{}: label {} outside the {k} manifest classes",
                path.display(),
                members.len() - 1
            )));
        }
        if let Some(c) = (0..k).find(|&c| members.get(c).is_none_or(Vec::is_empty)) {
            return Err(Error::data(format!(
                "{}: class {c} ({}) has no training rows",
                path.display(),
                self.classes[c]
            )));
        }
        Ok(())
    }
}
