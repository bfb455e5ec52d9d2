use serde::Serialize;

use oodkit_core::dataio::SynthSpec;

use crate::args::{Command, Common, DetectorOpts, Emit};
use crate::pipeline::ScoreOptions;

/// The exact configuration of an invocation, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<String>,
    pub ridge: f64,
    pub temperature: f64,
    pub start_index: Option<usize>,
    pub tpr_level: f64,
    pub seeds: Vec<u64>,
    pub out: String,
    pub emit: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_components: Option<usize>,
    pub ngram_order: usize,
    pub smoothing: f64,
    pub noise: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

impl RunConfig {
    fn base(subcommand: &'static str, opts: &ScoreOptions) -> Self {
        RunConfig {
            subcommand,
            manifest: None,
            variants: Vec::new(),
            ridge: opts.ridge,
            temperature: opts.temperature,
            start_index: opts.start_index,
            tpr_level: 0.95,
            seeds: Vec::new(),
            out: String::new(),
            emit: Vec::new(),
            detector: None,
            fractions: None,
            max_components: None,
            ngram_order: opts.ngram_order,
            smoothing: opts.smoothing,
            noise: opts.noise,
            synth: None,
        }
    }

    fn with_common(mut self, c: &Common, seeds: &[u64]) -> Self {
        self.manifest = Some(c.manifest.display().to_string());
        self.seeds = seeds.to_vec();
        self.out = c.out.display().to_string();
        let mut emit = c.emit.clone();
        emit.sort();
        emit.dedup();
        self.emit = emit.into_iter().map(Emit::name).collect();
        self
    }

    /// Configuration of `command`, with the seed list already resolved.
    pub fn from_command(command: &Command, seeds: &[u64]) -> Self {
        let path = |p: &Option<std::path::PathBuf>| p.as_ref().map(|p| p.display().to_string());
        match command {
            Command::Fit(a) => RunConfig {
                variants: vec![a.variant.name().into()],
                ..Self::base("fit", &options(&a.opts)).with_common(&a.common, seeds)
            },
            Command::Score(a) => RunConfig {
                variants: vec![a.variant.name().into()],
                detector: path(&a.detector),
                ..Self::base("score", &options(&a.opts)).with_common(&a.common, seeds)
            },
            Command::Eval(a) => RunConfig {
                variants: a.variant.iter().map(|m| m.name().into()).collect(),
                detector: path(&a.detector),
                tpr_level: a.tpr_level,
                ..Self::base("eval", &options(&a.opts)).with_common(&a.common, seeds)
            },
            Command::Diagnose(a) => RunConfig {
                detector: path(&a.detector),
                max_components: a.max_components,
                ..Self::base("diagnose", &options(&a.opts)).with_common(&a.common, seeds)
            },
            Command::Sweep(a) => RunConfig {
                variants: a.variant.iter().map(|m| m.name().into()).collect(),
                fractions: Some(a.fractions.clone()),
                tpr_level: a.tpr_level,
                ..Self::base("sweep", &options(&a.opts)).with_common(&a.common, seeds)
            },
            Command::Synth(a) => RunConfig {
                seeds: seeds.to_vec(),
                out: a.out.display().to_string(),
                emit: vec!["json"],
                synth: Some(synth_spec(a, 0)),
                ..Self::base("synth", &ScoreOptions::default())
            },
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

pub fn options(o: &DetectorOpts) -> ScoreOptions {
    ScoreOptions {
        ridge: o.ridge,
        start_index: o.start_index,
        temperature: o.temperature,
        ngram_order: o.ngram_order,
        smoothing: o.smoothing,
        noise: o.noise,
    }
}

pub fn synth_spec(a: &crate::args::SynthArgs, seed: u64) -> SynthSpec {
    SynthSpec {
        classes: a.classes,
        dim: a.dim,
        per_class: a.per_class,
        test_per_class: a.test_per_class,
        ood_count: a.ood_count,
        centroid_norm: a.centroid_norm,
        sigma: a.sigma,
        tail_ratio: a.tail_ratio,
        ood_offset: a.ood_offset,
        ood_mode: a.ood_mode,
        seed,
    }
}
