use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oodkit_core::dataio::OodMode;
use oodkit_core::detectors::llr::{DEFAULT_NOISE, DEFAULT_ORDER, DEFAULT_SMOOTHING};

use crate::method::Method;

#[derive(Debug, Parser)]
#[command(name = "oodkit", version, about = "Unsupervised out-of-domain detection over utterance embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a Mahalanobis-family detector per seed and write it to disk
    Fit(FitArgs),
    /// Write per-utterance OOD scores
    Score(ScoreArgs),
    /// Evaluate one or more variants over seeds (AUROC, AUPR, FPR@X)
    Eval(EvalArgs),
    /// Embedding-space geometry and the per-component term matrix
    Diagnose(DiagnoseArgs),
    /// Metrics against the fraction of training data used
    Sweep(SweepArgs),
    /// Generate a synthetic benchmark with a manifest
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Emit {
    Json,
    Csv,
    Svg,
}

impl Emit {
    pub fn name(self) -> &'static str {
        match self {
            Emit::Json => "json",
            Emit::Csv => "csv",
            Emit::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Dataset manifest (JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Seeds to use; defaults to every run in the manifest
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Output formats
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Emit::Json, Emit::Csv])]
    pub emit: Vec<Emit>,
}

#[derive(Debug, Clone, Args)]
pub struct DetectorOpts {
    /// Ridge added to the covariance, relative to its mean variance
    #[arg(long, default_value_t = oodkit_core::linalg::DEFAULT_RIDGE)]
    pub ridge: f64,
    /// First principal component (1-based) of partial variants; defaults to the class count
    #[arg(long)]
    pub start_index: Option<usize>,
    /// Softmax temperature for MSP
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// n-gram order of the built-in LLR language models
    #[arg(long, default_value_t = DEFAULT_ORDER)]
    pub ngram_order: usize,
    /// Add-k smoothing of the built-in LLR language models
    #[arg(long, default_value_t = DEFAULT_SMOOTHING)]
    pub smoothing: f64,
    /// Token corruption probability for the LLR background model
    #[arg(long, default_value_t = DEFAULT_NOISE)]
    pub noise: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "maha", value_parser = parse_method)]
    pub variant: Method,
    #[command(flatten)]
    pub opts: DetectorOpts,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "maha", value_parser = parse_method)]
    pub variant: Method,
    /// Previously fitted detector; otherwise fit on the training file
    #[arg(long)]
    pub detector: Option<PathBuf>,
    #[command(flatten)]
    pub opts: DetectorOpts,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Variants to evaluate (comma separated)
    #[arg(long, value_delimiter = ',', default_value = "maha", value_parser = parse_method)]
    pub variant: Vec<Method>,
    /// Previously fitted detector, used for all Mahalanobis-family variants
    #[arg(long)]
    pub detector: Option<PathBuf>,
    /// TPR level of the FPR columns
    #[arg(long, default_value_t = 0.95)]
    pub tpr_level: f64,
    #[command(flatten)]
    pub opts: DetectorOpts,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Previously fitted detector; otherwise a marginal detector is fitted
    #[arg(long)]
    pub detector: Option<PathBuf>,
    /// Keep only the first M components in the term matrix outputs
    #[arg(long)]
    pub max_components: Option<usize>,
    #[command(flatten)]
    pub opts: DetectorOpts,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_delimiter = ',', default_value = "maha,maha-marginal", value_parser = parse_method)]
    pub variant: Vec<Method>,
    /// Training fractions in (0, 1]
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.25,0.5,1.0")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 0.95)]
    pub tpr_level: f64,
    #[command(flatten)]
    pub opts: DetectorOpts,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory for the manifest and containers
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// One run per seed
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 15)]
    pub classes: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Training rows per class
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    /// In-domain test rows per class
    #[arg(long, default_value_t = 50)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 250)]
    pub ood_count: usize,
    #[arg(long, default_value_t = 19.75)]
    pub centroid_norm: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Isotropic noise level relative to sigma
    #[arg(long, default_value_t = 0.1)]
    pub tail_ratio: f64,
    /// OOD shift off the in-domain subspace, in units of sigma
    #[arg(long, default_value_t = 2.0)]
    pub ood_offset: f64,
    #[arg(long, default_value = "subspace-tail", value_parser = parse_ood_mode)]
    pub ood_mode: OodMode,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: oodkit_core::Error| e.to_string())
}

fn parse_ood_mode(s: &str) -> Result<OodMode, String> {
    s.parse().map_err(|e: oodkit_core::Error| e.to_string())
}
