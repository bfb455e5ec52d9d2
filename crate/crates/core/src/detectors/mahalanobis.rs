//! Mahalanobis-distance scores and the Euclidean baseline.
//!
//! All variants share one pooled within-class covariance `Sigma`. The
//! classwise score is the minimum over classes of the whitened squared
//! distance to each class centroid; marginal variants measure distance to the
//! global centroid instead. Partial variants sum the principal-component terms
//! `y_i^2 / lambda_i` starting from component `start_index` (1-based,
//! inclusive), dropping the directions of largest variance.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    fit_covariance, squared_norm, sym_eigendecompose, CovarianceModel, Matrix, SymmetricEigen,
    DEFAULT_RIDGE,
};

/// Default eigenvalue floor for principal-component scoring, relative to
/// the largest eigenvalue.
pub const DEFAULT_EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Classwise,
    Marginal,
    PartialClasswise,
    PartialMarginal,
    Euclidean,
    EuclideanMarginal,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Classwise,
        Variant::Marginal,
        Variant::PartialClasswise,
        Variant::PartialMarginal,
        Variant::Euclidean,
        Variant::EuclideanMarginal,
    ];

    pub fn tag(self) -> u8 {
        match self {
            Variant::Classwise => 0,
            Variant::Marginal => 1,
            Variant::PartialClasswise => 2,
            Variant::PartialMarginal => 3,
            Variant::Euclidean => 4,
            Variant::EuclideanMarginal => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Classwise => "classwise",
            Variant::Marginal => "marginal",
            Variant::PartialClasswise => "partial_classwise",
            Variant::PartialMarginal => "partial_marginal",
            Variant::Euclidean => "euclidean",
            Variant::EuclideanMarginal => "euclidean_marginal",
        }
    }

    /// Uses the global centroid instead of class centroids.
    pub fn is_marginal(self) -> bool {
        matches!(self, Variant::Marginal | Variant::PartialMarginal | Variant::EuclideanMarginal)
    }

    pub fn is_partial(self) -> bool {
        matches!(self, Variant::PartialClasswise | Variant::PartialMarginal)
    }

    pub fn is_euclidean(self) -> bool {
        matches!(self, Variant::Euclidean | Variant::EuclideanMarginal)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == normalized)
            .ok_or_else(|| Error::invalid(format!("unknown Mahalanobis variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MahaConfig {
    /// Ridge relative to the mean variance, see [`fit_covariance`].
    pub ridge: f64,
    /// First principal component (1-based) used by partial variants.
    /// `None` means the number of classes.
    pub start_index: Option<usize>,
    /// Components with `lambda_i <= eigen_floor * lambda_max` are skipped.
    pub eigen_floor: f64,
}

impl Default for MahaConfig {
    fn default() -> Self {
        MahaConfig { ridge: DEFAULT_RIDGE, start_index: None, eigen_floor: DEFAULT_EIGEN_FLOOR }
    }
}

/// A fitted Mahalanobis-family detector.
#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisDetector {
    covariance: CovarianceModel,
    eigen: SymmetricEigen,
    variant: Variant,
    start_index: usize,
    eigen_floor: f64,
    derived: Derived,
}

/// Per-centroid quantities that make scoring linear in the class count.
#[derive(Debug, Clone, PartialEq)]
struct Derived {
    /// `L^{-1} mu_c` rows (classwise) or `L^{-1} mu` (marginal); empty when
    /// the covariance has no factorization.
    whitened_centers: Vec<Vec<f64>>,
    /// `V^T mu_c` rows (classwise) or `V^T mu` (marginal).
    projected_centers: Vec<Vec<f64>>,
}

impl MahalanobisDetector {
    /// Fits the covariance model and its eigendecomposition.
    ///
    /// Without labels every row is treated as one class, which is only
    /// meaningful for marginal variants.
    pub fn fit(
        x: &Matrix,
        labels: Option<&[usize]>,
        variant: Variant,
        config: &MahaConfig,
    ) -> Result<Self> {
        if x.rows() < 2 {
            return Err(Error::invalid("at least two training rows are required"));
        }
        let single;
        let labels = match labels {
            Some(l) => l,
            None if variant.is_marginal() => {
                single = vec![0usize; x.rows()];
                &single
            }
            None => {
                return Err(Error::invalid(format!("variant {variant} needs class labels")));
            }
        };
        let covariance = fit_covariance(x, labels, config.ridge)?;
        let eigen = sym_eigendecompose(&covariance.sigma)?;
        // K > d leaves no discarded components; start at the last one
        let start = config.start_index.unwrap_or(covariance.num_classes().min(covariance.dim()));
        Self::from_parts(covariance, eigen, variant, start, config.eigen_floor)
    }

    pub fn from_parts(
        covariance: CovarianceModel,
        eigen: SymmetricEigen,
        variant: Variant,
        start_index: usize,
        eigen_floor: f64,
    ) -> Result<Self> {
        let d = covariance.dim();
        if eigen.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: eigen.dim() });
        }
        if start_index < 1 || start_index > d {
            return Err(Error::invalid(format!(
                "start index {start_index} is outside 1..={d}"
            )));
        }
        if !(eigen_floor >= 0.0) || !eigen_floor.is_finite() {
            return Err(Error::invalid(format!("eigenvalue floor must be non-negative, got {eigen_floor}")));
        }
        let centers: Vec<&[f64]> = if variant.is_marginal() {
            vec![covariance.global_mean.as_slice()]
        } else {
            (0..covariance.num_classes()).map(|c| covariance.class_mean(c)).collect()
        };
        let whitened_centers = match covariance.factor() {
            Ok(f) => centers.iter().map(|c| f.forward_solve(c)).collect::<Result<_>>()?,
            Err(_) => Vec::new(),
        };
        let projected_centers = centers.iter().map(|c| eigen.project(c)).collect();
        Ok(MahalanobisDetector {
            covariance,
            eigen,
            variant,
            start_index,
            eigen_floor,
            derived: Derived { whitened_centers, projected_centers },
        })
    }

    pub fn covariance(&self) -> &CovarianceModel {
        &self.covariance
    }

    pub fn eigen(&self) -> &SymmetricEigen {
        &self.eigen
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn eigen_floor(&self) -> f64 {
        self.eigen_floor
    }

    pub fn num_classes(&self) -> usize {
        self.covariance.num_classes()
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    /// Number of principal components below the eigenvalue floor.
    pub fn skipped_components(&self) -> usize {
        let cutoff = self.eigen.cutoff(self.eigen_floor);
        self.eigen.eigenvalues.iter().filter(|&&l| l <= cutoff).count()
    }

    /// `lambda_max / lambda_min`; infinite when `lambda_min <= 0`.
    pub fn condition_proxy(&self) -> f64 {
        let ev = &self.eigen.eigenvalues;
        match (ev.first(), ev.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }

    /// Same detector with another variant and start index; the fitted
    /// covariance and eigenbasis are reused.
    pub fn with_variant(&self, variant: Variant, start_index: Option<usize>) -> Result<Self> {
        Self::from_parts(
            self.covariance.clone(),
            self.eigen.clone(),
            variant,
            start_index.unwrap_or(self.start_index),
            self.eigen_floor,
        )
    }

    /// Principal-component terms `y_i^2 / lambda_i` of an already centered
    /// vector, in decreasing order of explained variance. Components under
    /// the eigenvalue floor contribute 0.
    pub fn terms(&self, centered: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(centered)?;
        let y = self.eigen.project(centered);
        Ok(self.terms_from_projection(&y))
    }

    fn terms_from_projection(&self, y: &[f64]) -> Vec<f64> {
        let cutoff = self.eigen.cutoff(self.eigen_floor);
        y.iter()
            .zip(&self.eigen.eigenvalues)
            .map(|(&yi, &l)| if l > cutoff { yi * yi / l } else { 0.0 })
            .collect()
    }

    /// Terms of `x - mu` around the global centroid.
    pub fn marginal_terms(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let centered: Vec<f64> =
            x.iter().zip(&self.covariance.global_mean).map(|(a, b)| a - b).collect();
        self.terms(&centered)
    }

    /// OOD score of one embedding. Higher means more out-of-domain.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite embedding"));
        }
        match self.variant {
            Variant::Classwise | Variant::Marginal => {
                let f = self.covariance.factor()?;
                let z = f.forward_solve(x)?;
                Ok(min_over(&self.derived.whitened_centers, |c| squared_distance(&z, c)))
            }
            Variant::PartialClasswise | Variant::PartialMarginal => {
                let y = self.eigen.project(x);
                let from = self.start_index - 1;
                Ok(min_over(&self.derived.projected_centers, |c| {
                    let diff: Vec<f64> = y.iter().zip(c).map(|(a, b)| a - b).collect();
                    self.terms_from_projection(&diff)[from..].iter().sum()
                }))
            }
            Variant::Euclidean => Ok(min_over_rows(&self.covariance.class_means, |c| {
                squared_distance(x, c)
            })),
            Variant::EuclideanMarginal => {
                Ok(squared_distance(x, &self.covariance.global_mean))
            }
        }
    }

    /// Scores every row; output order matches input order.
    pub fn score_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.rows() > 0 && x.cols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.cols() });
        }
        (0..x.rows()).into_par_iter().map(|i| self.score(x.row(i))).collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    squared_norm(&diff)
}

fn min_over(centers: &[Vec<f64>], f: impl Fn(&[f64]) -> f64) -> f64 {
    centers.iter().map(|c| f(c)).fold(f64::INFINITY, f64::min)
}

fn min_over_rows(centers: &Matrix, f: impl Fn(&[f64]) -> f64) -> f64 {
    centers.iter_rows().map(f).fold(f64::INFINITY, f64::min)
}
