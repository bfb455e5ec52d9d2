use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use oodkit_core::dataio::{
    generate_synthetic, write_embeddings, FileKey, Manifest, Run,
};
use oodkit_core::detectors::{read_detector, write_detector, MahalanobisDetector, Variant};
use oodkit_core::geometry::{geometry_stats, subspace_energy, term_matrix, GeometryReport};
use oodkit_core::metrics::{EvalReport, Metrics};
use oodkit_core::{Error, Result};

use crate::args::{
    Common, DiagnoseArgs, Emit, EvalArgs, FitArgs, ScoreArgs, SweepArgs, SynthArgs,
};
use crate::config::{options, synth_spec, RunConfig};
use crate::method::Method;
use crate::pipeline::{evaluate_runs, fit_detector, load_test, load_train, method_scores, sweep_runs, SweepSeries};

/// Loads the manifest and resolves the seed list (all runs by default).
pub fn resolve(common: &Common) -> Result<(Manifest, Vec<u64>)> {
    let m = Manifest::load(&common.manifest)?;
    let seeds = if common.seeds.is_empty() { m.seeds() } else { common.seeds.clone() };
    for &s in &seeds {
        m.run(s)?;
    }
    Ok((m, seeds))
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::File { path: dir.display().to_string(), source: e })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::File { path: path.display().to_string(), source: e })?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn maha_variant(method: Method, subcommand: &str) -> Result<Variant> {
    method.variant().ok_or_else(|| {
        Error::InvalidArgument(format!("{subcommand} needs a Mahalanobis-family variant, got {method}"))
    })
}

fn read_detector_arg(path: &Option<PathBuf>) -> Result<Option<MahalanobisDetector>> {
    path.as_deref().map(read_detector).transpose()
}

#[derive(Serialize)]
struct FitEntry {
    seed: u64,
    path: String,
    classes: usize,
    dim: usize,
    ridge: f64,
    ridge_shift: f64,
    covariance: &'static str,
    condition_proxy: Option<f64>,
    skipped_components: usize,
}

#[derive(Serialize)]
struct FitSummary {
    config: serde_json::Value,
    detectors: Vec<FitEntry>,
}

pub fn fit(a: &FitArgs, config: &RunConfig, m: &Manifest, seeds: &[u64]) -> Result<()> {
    let variant = maha_variant(a.variant, "fit")?;
    let opts = options(&a.opts);
    let mut entries = Vec::new();
    for &seed in seeds {
        let run = m.run(seed)?;
        let det = fit_detector(&load_train(m, run)?, variant, &opts)?;
        fs::create_dir_all(&a.common.out)
            .map_err(|e| Error::File { path: a.common.out.display().to_string(), source: e })?;
        let path = a.common.out.join(format!("detector-seed{seed}.oodd"));
        write_detector(&path, &det)?;
        let cov = det.covariance();
        let bypassed = variant.is_euclidean();
        let condition = det.condition_proxy();
        println!(
            "seed {seed}: {} K={} d={} ridge={:e} (diagonal shift {:e}) {} -> {}",
            variant,
            det.num_classes(),
            det.dim(),
            cov.ridge,
            cov.ridge_shift,
            if bypassed {
                "covariance bypassed (euclidean)".to_owned()
            } else {
                format!("condition lambda_max/lambda_min={condition:.6e}")
            },
            path.display()
        );
        entries.push(FitEntry {
            seed,
            path: path.display().to_string(),
            classes: det.num_classes(),
            dim: det.dim(),
            ridge: cov.ridge,
            ridge_shift: cov.ridge_shift,
            covariance: if bypassed { "bypassed" } else { "used" },
            condition_proxy: condition.is_finite().then_some(condition),
            skipped_components: det.skipped_components(),
        });
    }
    if a.common.emit.contains(&Emit::Json) {
        let summary = FitSummary { config: config.to_value(), detectors: entries };
        write_out(&a.common.out, "fit.json", &to_json(&summary)?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScoreFile<'a> {
    config: serde_json::Value,
    seed: u64,
    variant: &'a str,
    id_scores: &'a [f64],
    ood_scores: &'a [f64],
}

pub fn score(a: &ScoreArgs, config: &RunConfig, m: &Manifest, seeds: &[u64]) -> Result<()> {
    let fitted = read_detector_arg(&a.detector)?;
    let opts = options(&a.opts);
    for &seed in seeds {
        let run = m.run(seed)?;
        let s = method_scores(m, run, a.variant, &opts, fitted.as_ref())?;
        let stem = format!("scores-{}-seed{seed}", a.variant);
        if a.common.emit.contains(&Emit::Json) {
            let file = ScoreFile {
                config: config.to_value(),
                seed,
                variant: a.variant.name(),
                id_scores: &s.id_scores,
                ood_scores: &s.ood_scores,
            };
            write_out(&a.common.out, &format!("{stem}.json"), &to_json(&file)?)?;
        }
        if a.common.emit.contains(&Emit::Csv) {
            let mut csv = String::from("split,index,score\n");
            for (split, v) in [("test_id", &s.id_scores), ("test_ood", &s.ood_scores)] {
                for (i, x) in v.iter().enumerate() {
                    let _ = writeln!(csv, "{split},{i},{x:?}");
                }
            }
            write_out(&a.common.out, &format!("{stem}.csv"), &csv)?;
        }
        println!("seed {seed}: {} ID and {} OOD scores", s.id_scores.len(), s.ood_scores.len());
    }
    Ok(())
}

pub fn eval(a: &EvalArgs, config: &RunConfig, m: &Manifest, seeds: &[u64]) -> Result<EvalReport> {
    let fitted = read_detector_arg(&a.detector)?;
    let opts = options(&a.opts);
    let variants = evaluate_runs(m, seeds, &a.variant, &opts, a.tpr_level, fitted.as_ref())?;
    let report = EvalReport {
        dataset: m.dataset.clone(),
        tpr_level: a.tpr_level,
        seeds: seeds.to_vec(),
        variants,
        config: config.to_value(),
    };
    if a.common.emit.contains(&Emit::Json) {
        write_out(&a.common.out, "report.json", &report.to_json()?)?;
    }
    if a.common.emit.contains(&Emit::Csv) {
        write_out(&a.common.out, "report.csv", &report.to_csv())?;
    }
    for v in &report.variants {
        println!(
            "{:<22} auroc {:5.1} ± {:.1}  aupr_ood {:5.1} ± {:.1}  fpr95_ood {:5.1} ± {:.1}  fpr95_id {:5.1} ± {:.1}",
            v.variant,
            100.0 * v.mean.auroc,
            100.0 * v.std.auroc,
            100.0 * v.mean.aupr_ood,
            100.0 * v.std.aupr_ood,
            100.0 * v.mean.fpr95_ood,
            100.0 * v.std.fpr95_ood,
            100.0 * v.mean.fpr95_id,
            100.0 * v.std.fpr95_id,
        );
    }
    Ok(report)
}

#[derive(Serialize)]
struct DiagnoseReport {
    config: serde_json::Value,
    seed: u64,
    geometry: GeometryReport,
    start_index: usize,
    subspace_energy: f64,
    skipped_components: usize,
}

pub fn diagnose(a: &DiagnoseArgs, config: &RunConfig, m: &Manifest, seeds: &[u64]) -> Result<()> {
    let seed = *seeds.first().ok_or_else(|| Error::InvalidData("manifest lists no runs".into()))?;
    let run: &Run = m.run(seed)?;
    let train = load_train(m, run)?;
    let geometry = geometry_stats(&train)?;
    let opts = options(&a.opts);
    let det = match read_detector_arg(&a.detector)? {
        Some(d) => d.with_variant(Variant::Marginal, opts.start_index)?,
        None => fit_detector(&train, Variant::Marginal, &opts)?,
    };
    let (id, ood) = load_test(m, run)?;
    let mut terms = term_matrix(&det, &id, &ood)?;
    if let Some(mc) = a.max_components {
        terms = terms.truncate(mc);
    }
    let out = &a.common.out;
    let report = DiagnoseReport {
        config: config.to_value(),
        seed,
        start_index: det.start_index(),
        subspace_energy: subspace_energy(&det, det.start_index()),
        skipped_components: det.skipped_components(),
        geometry,
    };
    if a.common.emit.contains(&Emit::Json) {
        write_out(out, "geometry.json", &to_json(&report)?)?;
    }
    if a.common.emit.contains(&Emit::Csv) {
        write_out(out, "terms.csv", &terms.to_csv())?;
    }
    if a.common.emit.contains(&Emit::Svg) {
        write_out(out, "terms.svg", &terms.to_svg())?;
    }
    let g = &report.geometry;
    if let Some(p) = g.pairwise_centroid_cosine {
        println!("pairwise centroid cosine {:.4} ± {:.4}", p.mean, p.std);
    }
    println!("centroid length {:.4} ± {:.4}", g.centroid_length.mean, g.centroid_length.std);
    if let Some(c) = g.instance_centroid_cosine {
        println!("instance-centroid cosine {:.4} ± {:.4}", c.mean, c.std);
    }
    println!("variance in components before {}: {:.4}", report.start_index, report.subspace_energy);
    Ok(())
}

#[derive(Serialize)]
pub struct SweepReport {
    pub dataset: String,
    pub tpr_level: f64,
    pub seeds: Vec<u64>,
    pub fractions: Vec<f64>,
    pub series: Vec<SweepSeries>,
    pub config: serde_json::Value,
}

impl SweepReport {
    /// Same layout as the evaluation CSV with a `fraction` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,fraction,seed");
        for name in Metrics::NAMES {
            let _ = write!(out, ",{name}");
        }
        for name in Metrics::NAMES {
            let _ = write!(out, ",{name}_raw");
        }
        out.push('\n');
        for s in &self.series {
            for p in &s.points {
                let r = &p.report;
                let rows = r
                    .per_seed
                    .iter()
                    .map(|x| (x.seed.to_string(), x.metrics))
                    .chain([("mean".to_owned(), r.mean), ("std".to_owned(), r.std)]);
                for (label, m) in rows {
                    let _ = write!(out, "{},{:?},{label}", s.variant, p.fraction);
                    for x in m.values() {
                        let _ = write!(out, ",{:.1}", 100.0 * x);
                    }
                    for x in m.values() {
                        let _ = write!(out, ",{x:?}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }
}

pub fn sweep(a: &SweepArgs, config: &RunConfig, m: &Manifest, seeds: &[u64]) -> Result<SweepReport> {
    let variants: Vec<Variant> =
        a.variant.iter().map(|&v| maha_variant(v, "sweep")).collect::<Result<_>>()?;
    let series = sweep_runs(m, seeds, &variants, &a.fractions, &options(&a.opts), a.tpr_level)?;
    let report = SweepReport {
        dataset: m.dataset.clone(),
        tpr_level: a.tpr_level,
        seeds: seeds.to_vec(),
        fractions: a.fractions.clone(),
        series,
        config: config.to_value(),
    };
    if a.common.emit.contains(&Emit::Json) {
        write_out(&a.common.out, "sweep.json", &to_json(&report)?)?;
    }
    if a.common.emit.contains(&Emit::Csv) {
        write_out(&a.common.out, "sweep.csv", &report.to_csv())?;
    }
    for s in &report.series {
        let cells: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{}: {:.1}", p.fraction, 100.0 * p.report.mean.aupr_ood))
            .collect();
        println!("{:<22} aupr_ood  {}", s.variant, cells.join("  "));
    }
    Ok(report)
}

pub fn synth(a: &SynthArgs, config: &RunConfig) -> Result<PathBuf> {
    let mut runs = Vec::new();
    for &seed in &a.seeds {
        let data = generate_synthetic(&synth_spec(a, seed))?;
        let rel = PathBuf::from(format!("seed-{seed}"));
        let dir = a.out.join(&rel);
        fs::create_dir_all(&dir).map_err(|e| Error::File { path: dir.display().to_string(), source: e })?;
        let mut files = std::collections::BTreeMap::new();
        for (key, set) in [
            (FileKey::Train, &data.train),
            (FileKey::TestId, &data.test_id),
            (FileKey::TestOod, &data.test_ood),
        ] {
            let name = format!("{}.oode", key.name());
            write_embeddings(&dir.join(&name), set)?;
            files.insert(key, rel.join(name));
        }
        runs.push(Run { seed, split_id: None, files });
    }
    let classes = (0..a.classes).map(|c| format!("class_{c:02}")).collect();
    let manifest = Manifest::new("synthetic", classes, runs);
    fs::create_dir_all(&a.out).map_err(|e| Error::File { path: a.out.display().to_string(), source: e })?;
    let path = a.out.join("manifest.json");
    manifest.save(&path)?;
    write_out(&a.out, "synth.json", &to_json(&config)?)?;
    println!("wrote {} run(s) to {}", a.seeds.len(), path.display());
    Ok(path)
}
