use rand::seq::SliceRandom;

use crate::dataio::EmbeddingSet;
use crate::error::{Error, Result};
use crate::random::seeded;

/// Stratified subsample keeping `round(fraction * n_c)` rows of every class.
///
/// Selected rows keep their original order. Fails when a class would keep
/// fewer than two rows.
pub fn subsample_fraction(train: &EmbeddingSet, fraction: f64, seed: u64) -> Result<EmbeddingSet> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    if train.labels.is_none() {
        return Err(Error::data("subsampling needs class labels"));
    }
    let mut rng = seeded(seed);
    let mut keep = Vec::new();
    for (class, mut rows) in train.class_members().into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let m = (fraction * rows.len() as f64).round() as usize;
        if m < 2 {
            return Err(Error::ClassTooSmall { class, rows: m });
        }
        if m < rows.len() {
            rows.shuffle(&mut rng);
            rows.truncate(m);
        }
        keep.extend(rows);
    }
    keep.sort_unstable();
    Ok(train.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Role;
    use crate::linalg::Matrix;

    fn set(per_class: usize, classes: u32) -> EmbeddingSet {
        let n = per_class * classes as usize;
        let m = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let labels = (0..n).map(|i| i as u32 % classes).collect();
        EmbeddingSet::new(m, Some(labels), Role::Train, "t").unwrap()
    }

    #[test]
    fn full_fraction_is_identity() {
        let s = set(10, 3);
        assert_eq!(subsample_fraction(&s, 1.0, 4).unwrap(), s);
    }

    #[test]
    fn half_is_stratified() {
        let s = set(100, 4);
        let sub = subsample_fraction(&s, 0.5, 4).unwrap();
        assert!(sub.class_members().iter().all(|m| m.len() == 50));
        assert_eq!(sub, subsample_fraction(&s, 0.5, 4).unwrap());
        assert_ne!(sub, subsample_fraction(&s, 0.5, 5).unwrap());
        let rows = sub.matrix.column(0);
        assert!(rows.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn too_small_names_the_class() {
        let s = set(10, 2);
        assert!(matches!(
            subsample_fraction(&s, 0.1, 0),
            Err(Error::ClassTooSmall { class: 0, rows: 1 })
        ));
        assert!(subsample_fraction(&s, 0.0, 0).is_err());
        assert!(subsample_fraction(&s, 1.5, 0).is_err());
    }
}
