//! Synthetic embedding benchmark.
//!
//! Class centroids sit on mutually orthogonal axes at radius `r`
//! (`mu_c = r e_c`). Within-class noise has standard deviation `sigma` inside
//! the (K-1)-dimensional hyperplane spanned by centroid differences, plus an
//! isotropic floor of `tail_ratio * sigma` in every direction. In-domain data
//! is therefore close to a low-dimensional subspace, and most of the pooled
//! covariance's variance lies in its first K-1 principal components.
//!
//! Out-of-domain rows follow one of three placements:
//! - `subspace_tail`: a class centroid plus in-domain noise, shifted by
//!   `ood_offset * sigma` along a random direction of axes `K..d`, where
//!   in-domain rows barely vary;
//! - `between_centroids`: the midpoint of two centroids rescaled to radius
//!   `r`, plus in-domain noise;
//! - `uniform_shell`: uniformly random directions at radius `r`.
//!
//! All values are rounded through `f32`, so the in-memory sets equal what the
//! "OODE" container stores.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{EmbeddingSet, Role};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::random::Gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OodMode {
    SubspaceTail,
    BetweenCentroids,
    UniformShell,
}

impl OodMode {
    pub fn name(self) -> &'static str {
        match self {
            OodMode::SubspaceTail => "subspace_tail",
            OodMode::BetweenCentroids => "between_centroids",
            OodMode::UniformShell => "uniform_shell",
        }
    }
}

impl fmt::Display for OodMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OodMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        [OodMode::SubspaceTail, OodMode::BetweenCentroids, OodMode::UniformShell]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown OOD mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub ood_count: usize,
    pub centroid_norm: f64,
    pub sigma: f64,
    pub tail_ratio: f64,
    pub ood_offset: f64,
    pub ood_mode: OodMode,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 15,
            dim: 64,
            per_class: 200,
            test_per_class: 50,
            ood_count: 250,
            centroid_norm: 19.75,
            sigma: 1.0,
            tail_ratio: 0.1,
            ood_offset: 2.0,
            ood_mode: OodMode::SubspaceTail,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.dim == 0 {
            return Err(Error::invalid("classes and dim must be positive"));
        }
        if self.classes > self.dim {
            return Err(Error::invalid(format!(
                "{} classes cannot have orthogonal centroids in {} dimensions",
                self.classes, self.dim
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be finite and positive"));
        }
        if !(self.centroid_norm > 0.0) || !self.centroid_norm.is_finite() {
            return Err(Error::invalid("centroid norm must be finite and positive"));
        }
        if !(self.tail_ratio >= 0.0) || !(self.ood_offset >= 0.0) {
            return Err(Error::invalid("tail ratio and OOD offset must be non-negative"));
        }
        if self.per_class < 1 {
            return Err(Error::invalid("per_class must be at least 1"));
        }
        match self.ood_mode {
            OodMode::SubspaceTail if self.classes == self.dim => {
                Err(Error::invalid("subspace_tail needs dim > classes"))
            }
            OodMode::BetweenCentroids if self.classes < 2 => {
                Err(Error::invalid("between_centroids needs at least two classes"))
            }
            _ => Ok(()),
        }
    }

    /// Noise-free centroids `r e_c`, one per row.
    pub fn centroids(&self) -> Matrix {
        let mut m = Matrix::zeros(self.classes, self.dim);
        for c in 0..self.classes {
            m.set(c, c, self.centroid_norm);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: EmbeddingSet,
    pub test_id: EmbeddingSet,
    pub test_ood: EmbeddingSet,
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut g = Gaussian::new(spec.seed);
    let source = format!("synthetic:{}:seed={}", spec.ood_mode, spec.seed);

    let labelled = |per_class: usize, g: &mut Gaussian| {
        let mut rows = Vec::with_capacity(per_class * spec.classes * spec.dim);
        let mut labels = Vec::with_capacity(per_class * spec.classes);
        for c in 0..spec.classes {
            for _ in 0..per_class {
                let mut x = noise(spec, g);
                x[c] += spec.centroid_norm;
                rows.extend(x);
                labels.push(c as u32);
            }
        }
        (rows, labels)
    };
    let (train_rows, train_labels) = labelled(spec.per_class, &mut g);
    let (test_rows, test_labels) = labelled(spec.test_per_class, &mut g);

    let mut ood_rows = Vec::with_capacity(spec.ood_count * spec.dim);
    for _ in 0..spec.ood_count {
        ood_rows.extend(ood_point(spec, &mut g));
    }

    let to_set = |rows: Vec<f64>, labels: Option<Vec<u32>>, role: Role| {
        let n = rows.len() / spec.dim;
        let rows = rows.into_iter().map(|v| f64::from(v as f32)).collect();
        EmbeddingSet::new(Matrix::new(n, spec.dim, rows)?, labels, role, source.clone())
    };
    Ok(SynthData {
        train: to_set(train_rows, Some(train_labels), Role::Train)?,
        test_id: to_set(test_rows, Some(test_labels), Role::TestId)?,
        test_ood: to_set(ood_rows, None, Role::TestOod)?,
    })
}

/// Within-class noise: `sigma` in the centroid hyperplane plus the isotropic floor.
fn noise(spec: &SynthSpec, g: &mut Gaussian) -> Vec<f64> {
    let k = spec.classes;
    let in_plane: Vec<f64> = (0..k).map(|_| spec.sigma * g.sample()).collect();
    let mean = in_plane.iter().sum::<f64>() / k as f64;
    let floor = spec.tail_ratio * spec.sigma;
    (0..spec.dim)
        .map(|i| {
            let base = if i < k { in_plane[i] - mean } else { 0.0 };
            base + floor * g.sample()
        })
        .collect()
}

fn ood_point(spec: &SynthSpec, g: &mut Gaussian) -> Vec<f64> {
    let k = spec.classes;
    let r = spec.centroid_norm;
    match spec.ood_mode {
        OodMode::SubspaceTail => {
            let c = g.rng().random_range(0..k);
            let mut x = noise(spec, g);
            x[c] += r;
            let dir = g.unit_vector(spec.dim - k);
            for (xi, u) in x[k..].iter_mut().zip(dir) {
                *xi += spec.ood_offset * spec.sigma * u;
            }
            x
        }
        OodMode::BetweenCentroids => {
            let a = g.rng().random_range(0..k);
            let b = (a + 1 + g.rng().random_range(0..k - 1)) % k;
            let mut x = noise(spec, g);
            x[a] += r / std::f64::consts::SQRT_2;
            x[b] += r / std::f64::consts::SQRT_2;
            x
        }
        OodMode::UniformShell => g.unit_vector(spec.dim).into_iter().map(|u| r * u).collect(),
    }
}
