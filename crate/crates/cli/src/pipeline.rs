//! Scoring and evaluation of manifest runs, shared by the subcommands.

use rayon::prelude::*;
use serde::Serialize;

use oodkit_core::dataio::{subsample_fraction, EmbeddingSet, FileKey, Manifest, Run};
use oodkit_core::detectors::{
    fit_mahalanobis, llr_score, msp_score_set, LlrScorer, MahaConfig, MahalanobisDetector,
    MspScorer, Variant, DEFAULT_EIGEN_FLOOR,
};
use oodkit_core::metrics::{evaluate, LabeledScores, SeedMetrics, VariantReport};
use oodkit_core::{Error, Result};

use crate::method::Method;

/// Detector hyperparameters shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreOptions {
    pub ridge: f64,
    pub start_index: Option<usize>,
    pub temperature: f64,
    pub ngram_order: usize,
    pub smoothing: f64,
    pub noise: f64,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        use oodkit_core::detectors::llr::{DEFAULT_NOISE, DEFAULT_ORDER, DEFAULT_SMOOTHING};
        ScoreOptions {
            ridge: oodkit_core::linalg::DEFAULT_RIDGE,
            start_index: None,
            temperature: 1.0,
            ngram_order: DEFAULT_ORDER,
            smoothing: DEFAULT_SMOOTHING,
            noise: DEFAULT_NOISE,
        }
    }
}

impl ScoreOptions {
    pub fn maha_config(&self) -> MahaConfig {
        MahaConfig { ridge: self.ridge, start_index: self.start_index, eigen_floor: DEFAULT_EIGEN_FLOOR }
    }
}

/// Resolves a file of a run, explaining what a missing OOD split means.
pub fn need(m: &Manifest, run: &Run, key: FileKey) -> Result<std::path::PathBuf> {
    m.path(run, key).ok_or_else(|| {
        let mut msg = format!("run with seed {} has no {} file", run.seed, key.name());
        if key.role().is_ood() {
            msg.push_str(
                "; manifests with random ID/OOD intent splits (SNIPS-style) must list the \
                 OOD split files for every run",
            );
        }
        Error::InvalidData(msg)
    })
}

fn load(m: &Manifest, run: &Run, key: FileKey) -> Result<EmbeddingSet> {
    need(m, run, key)?;
    m.load_set(run, key)
}

pub fn load_train(m: &Manifest, run: &Run) -> Result<EmbeddingSet> {
    load(m, run, FileKey::Train)
}

/// In-domain and out-of-domain test embeddings of a run.
pub fn load_test(m: &Manifest, run: &Run) -> Result<(EmbeddingSet, EmbeddingSet)> {
    Ok((load(m, run, FileKey::TestId)?, load(m, run, FileKey::TestOod)?))
}

pub fn fit_detector(train: &EmbeddingSet, variant: Variant, opts: &ScoreOptions) -> Result<MahalanobisDetector> {
    fit_mahalanobis(train, variant, &opts.maha_config())
}

pub fn maha_scores(det: &MahalanobisDetector, id: &EmbeddingSet, ood: &EmbeddingSet) -> Result<LabeledScores> {
    LabeledScores::new(det.score_batch(&id.matrix)?, det.score_batch(&ood.matrix)?)
}

/// Test scores of one run under `method`.
///
/// Mahalanobis-family methods use `fitted` when given (re-targeted to the
/// requested variant) and otherwise fit on the run's training file.
pub fn method_scores(
    m: &Manifest,
    run: &Run,
    method: Method,
    opts: &ScoreOptions,
    fitted: Option<&MahalanobisDetector>,
) -> Result<LabeledScores> {
    match method {
        Method::Maha(v) => {
            let (id, ood) = load_test(m, run)?;
            let det = match fitted {
                Some(d) => d.with_variant(v, opts.start_index)?,
                None => fit_detector(&load_train(m, run)?, v, opts)?,
            };
            maha_scores(&det, &id, &ood)
        }
        Method::Msp => {
            let scorer = MspScorer::new(opts.temperature)?;
            let id = load(m, run, FileKey::TestIdLogits)?;
            let ood = load(m, run, FileKey::TestOodLogits)?;
            LabeledScores::new(msp_score_set(&scorer, &id)?.scores, msp_score_set(&scorer, &ood)?.scores)
        }
        Method::Llr => llr_scores(m, run, opts),
    }
}

/// LLR from exported log-likelihood files when present, otherwise from the
/// built-in n-gram models trained on the run's text.
fn llr_scores(m: &Manifest, run: &Run, opts: &ScoreOptions) -> Result<LabeledScores> {
    let exported = [
        FileKey::TestIdLoglik,
        FileKey::TestIdLoglikBg,
        FileKey::TestOodLoglik,
        FileKey::TestOodLoglikBg,
    ];
    if exported.iter().all(|&k| m.path(run, k).is_some()) {
        let side = |l: FileKey, bg: FileKey| -> Result<Vec<f64>> {
            let (l, bg) = (load(m, run, l)?, load(m, run, bg)?);
            if l.len() != bg.len() {
                return Err(Error::DimensionMismatch { expected: l.len(), found: bg.len() });
            }
            Ok((0..l.len()).map(|i| llr_score(l.matrix.get(i, 0), bg.matrix.get(i, 0))).collect())
        };
        return LabeledScores::new(
            side(FileKey::TestIdLoglik, FileKey::TestIdLoglikBg)?,
            side(FileKey::TestOodLoglik, FileKey::TestOodLoglikBg)?,
        );
    }
    let text = |key| {
        need(m, run, key)?;
        m.load_text(run, key)
    };
    let scorer =
        LlrScorer::fit(&text(FileKey::TrainText)?, opts.ngram_order, opts.smoothing, opts.noise, run.seed)?;
    let score = |key| -> Result<Vec<f64>> { Ok(text(key)?.par_iter().map(|u| scorer.score(u)).collect()) };
    LabeledScores::new(score(FileKey::TestIdText)?, score(FileKey::TestOodText)?)
}

/// Runs every (method, seed) pair in parallel; results keep the
/// (method, seed) order.
///
/// All Mahalanobis-family variants share one covariance model, so each run
/// is fitted once and the variants are derived from it.
pub fn evaluate_runs(
    m: &Manifest,
    seeds: &[u64],
    methods: &[Method],
    opts: &ScoreOptions,
    tpr_level: f64,
    fitted: Option<&MahalanobisDetector>,
) -> Result<Vec<VariantReport>> {
    let runs: Vec<&Run> = seeds.iter().map(|&s| m.run(s)).collect::<Result<_>>()?;
    let needs_fit = fitted.is_none() && methods.iter().any(|m| m.variant().is_some());
    // [seed][method]
    let grid: Vec<Vec<SeedMetrics>> = runs
        .par_iter()
        .map(|run| {
            let own = if needs_fit {
                Some(fit_detector(&load_train(m, run)?, Variant::Classwise, opts)?)
            } else {
                None
            };
            let base = fitted.or(own.as_ref());
            methods
                .par_iter()
                .map(|&method| {
                    let scores = method_scores(m, run, method, opts, base)?;
                    Ok(SeedMetrics { seed: run.seed, metrics: evaluate(&scores, tpr_level)? })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    methods
        .iter()
        .enumerate()
        .map(|(mi, method)| VariantReport::new(method.name(), grid.iter().map(|g| g[mi]).collect()))
        .collect()
}

/// Metrics of one training fraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub fraction: f64,
    #[serde(flatten)]
    pub report: VariantReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSeries {
    pub variant: String,
    pub points: Vec<SweepPoint>,
}

/// Refits each variant on stratified subsamples of the training set and
/// evaluates on the full test split.
pub fn sweep_runs(
    m: &Manifest,
    seeds: &[u64],
    variants: &[Variant],
    fractions: &[f64],
    opts: &ScoreOptions,
    tpr_level: f64,
) -> Result<Vec<SweepSeries>> {
    let runs: Vec<&Run> = seeds.iter().map(|&s| m.run(s)).collect::<Result<_>>()?;
    // [seed][variant][fraction]
    let grid: Vec<Vec<Vec<SeedMetrics>>> = runs
        .par_iter()
        .map(|run| {
            let train = load_train(m, run)?;
            let (id, ood) = load_test(m, run)?;
            let subsets: Vec<EmbeddingSet> = fractions
                .iter()
                .map(|&f| subsample_fraction(&train, f, run.seed))
                .collect::<Result<_>>()?;
            // [fraction][variant], one fit per subset
            let by_fraction: Vec<Vec<SeedMetrics>> = subsets
                .par_iter()
                .map(|sub| {
                    let base = fit_detector(sub, Variant::Classwise, opts)?;
                    variants
                        .iter()
                        .map(|&v| {
                            let det = base.with_variant(v, opts.start_index)?;
                            let metrics = evaluate(&maha_scores(&det, &id, &ood)?, tpr_level)?;
                            Ok(SeedMetrics { seed: run.seed, metrics })
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            Ok((0..variants.len())
                .map(|vi| by_fraction.iter().map(|f| f[vi]).collect())
                .collect::<Vec<Vec<SeedMetrics>>>())
        })
        .collect::<Result<_>>()?;

    variants
        .iter()
        .enumerate()
        .map(|(vi, &v)| {
            let points = fractions
                .iter()
                .enumerate()
                .map(|(fi, &fraction)| {
                    let per_seed = grid.iter().map(|g| g[vi][fi]).collect();
                    Ok(SweepPoint { fraction, report: VariantReport::new(Method::Maha(v).name(), per_seed)? })
                })
                .collect::<Result<_>>()?;
            Ok(SweepSeries { variant: Method::Maha(v).name().to_owned(), points })
        })
        .collect()
}
