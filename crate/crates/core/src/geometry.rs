//! Embedding-space diagnostics: centroid geometry, the per-component
//! Mahalanobis term matrix and how much variance a few components carry.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::EmbeddingSet;
use crate::detectors::MahalanobisDetector;
use crate::error::{Error, Result};
use crate::linalg::{dot, fit_covariance, sym_eigendecompose, Matrix};

/// Mean and population standard deviation of a set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt(), count: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub classes: usize,
    pub dim: usize,
    pub rows: usize,
    /// Over all unordered class pairs; absent with fewer than two classes.
    pub pairwise_centroid_cosine: Option<MeanStd>,
    pub centroid_length: MeanStd,
    /// Training rows against the centroid of their own class.
    pub instance_centroid_cosine: Option<MeanStd>,
    /// `lambda_i / sum(lambda)` of the pooled covariance, descending.
    pub explained_variance_profile: Vec<f64>,
    /// Rows (or centroid pairs) left out because a vector was zero.
    pub excluded_zero_rows: usize,
    pub excluded_zero_pairs: usize,
}

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Centroid and cluster statistics of a labeled training set.
pub fn geometry_stats(train: &EmbeddingSet) -> Result<GeometryReport> {
    let labels = train
        .labels_usize()
        .ok_or_else(|| Error::data("geometry statistics need class labels"))?;
    let cov = fit_covariance(&train.matrix, &labels, 0.0)?;
    let k = cov.num_classes();

    let mut pair_cos = Vec::new();
    let mut excluded_pairs = 0;
    for a in 0..k {
        for b in a + 1..k {
            match cosine(cov.class_mean(a), cov.class_mean(b)) {
                Some(c) => pair_cos.push(c),
                None => excluded_pairs += 1,
            }
        }
    }
    let lengths: Vec<f64> = (0..k).map(|c| dot(cov.class_mean(c), cov.class_mean(c)).sqrt()).collect();

    let inst: Vec<Option<f64>> = (0..train.len())
        .into_par_iter()
        .map(|i| cosine(train.matrix.row(i), cov.class_mean(labels[i])))
        .collect();
    let excluded_rows = inst.iter().filter(|c| c.is_none()).count();
    let inst: Vec<f64> = inst.into_iter().flatten().collect();

    let eigen = sym_eigendecompose(&cov.sigma)?;
    let clamped: Vec<f64> = eigen.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    let profile = if total > 0.0 {
        clamped.iter().map(|l| l / total).collect()
    } else {
        vec![0.0; clamped.len()]
    };

    Ok(GeometryReport {
        classes: k,
        dim: train.dim(),
        rows: train.len(),
        pairwise_centroid_cosine: MeanStd::of(&pair_cos),
        centroid_length: MeanStd::of(&lengths).expect("at least one class"),
        instance_centroid_cosine: MeanStd::of(&inst),
        explained_variance_profile: profile,
        excluded_zero_rows: excluded_rows,
        excluded_zero_pairs: excluded_pairs,
    })
}

/// Fraction of total variance in the components before `start` (1-based).
pub fn subspace_energy(det: &MahalanobisDetector, start: usize) -> f64 {
    let ev: Vec<f64> = det.eigen().eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = ev.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let take = start.saturating_sub(1).min(ev.len());
    ev[..take].iter().sum::<f64>() / total
}

/// Per-component terms `y_i^2 / lambda_i` around the global centroid.
///
/// Rows are OOD utterances first, then ID. Columns follow decreasing
/// explained variance. `marker` is the 1-based component index where the
/// partial variants start summing.
#[derive(Debug, Clone, PartialEq)]
pub struct TermMatrix {
    pub terms: Matrix,
    pub ood_rows: usize,
    pub marker: usize,
}

pub fn term_matrix(
    det: &MahalanobisDetector,
    id: &EmbeddingSet,
    ood: &EmbeddingSet,
) -> Result<TermMatrix> {
    for set in [ood, id] {
        if !set.is_empty() && set.dim() != det.dim() {
            return Err(Error::DimensionMismatch { expected: det.dim(), found: set.dim() });
        }
    }
    let rows: Vec<&[f64]> = ood.matrix.iter_rows().chain(id.matrix.iter_rows()).collect();
    let terms: Vec<Vec<f64>> =
        rows.par_iter().map(|x| det.marginal_terms(x)).collect::<Result<_>>()?;
    let data = terms.into_iter().flatten().collect();
    Ok(TermMatrix {
        terms: Matrix::new(rows.len(), det.dim(), data)?,
        ood_rows: ood.len(),
        marker: det.num_classes(),
    })
}

const CELL: usize = 4;

impl TermMatrix {
    pub fn row_sums(&self) -> Vec<f64> {
        self.terms.iter_rows().map(|r| r.iter().sum()).collect()
    }

    /// Keeps the first `m` components.
    pub fn truncate(&self, m: usize) -> TermMatrix {
        TermMatrix { terms: self.terms.truncate_cols(m), ..self.clone() }
    }

    /// Header of component indices, then one row per utterance.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("role");
        for i in 1..=self.terms.cols() {
            let _ = write!(out, ",{i}");
        }
        out.push('\n');
        for (r, row) in self.terms.iter_rows().enumerate() {
            out.push_str(if r < self.ood_rows { "ood" } else { "id" });
            for v in row {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }

    /// Heatmap on a log scale with a horizontal line under the OOD block and
    /// a vertical line before component `marker`.
    pub fn to_svg(&self) -> String {
        let (rows, cols) = (self.terms.rows(), self.terms.cols());
        let (w, h) = (cols * CELL, rows * CELL);
        let max = self.terms.as_slice().iter().copied().fold(0.0f64, f64::max);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
        );
        let _ = writeln!(out, r##"<rect width="{w}" height="{h}" fill="#ffffff"/>"##);
        for (r, row) in self.terms.iter_rows().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                let t = if max > 0.0 { v.ln_1p() / max.ln_1p() } else { 0.0 };
                if t <= 0.0 {
                    continue;
                }
                let _ = writeln!(
                    out,
                    r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                    c * CELL,
                    r * CELL,
                    shade(t)
                );
            }
        }
        if self.ood_rows > 0 && self.ood_rows < rows {
            let y = self.ood_rows * CELL;
            let _ = writeln!(
                out,
                r##"<line x1="0" y1="{y}" x2="{w}" y2="{y}" stroke="#000000" stroke-width="1"/>"##
            );
        }
        if self.marker >= 1 && self.marker <= cols {
            let x = (self.marker - 1) * CELL;
            let _ = writeln!(
                out,
                r##"<line x1="{x}" y1="0" x2="{x}" y2="{h}" stroke="#000000" stroke-width="1"/>"##
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// White to dark blue.
fn shade(t: f64) -> String {
    let mix = |lo: f64, hi: f64| (hi + t.clamp(0.0, 1.0) * (lo - hi)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(8.0, 255.0), mix(48.0, 255.0), mix(107.0, 255.0))
}
