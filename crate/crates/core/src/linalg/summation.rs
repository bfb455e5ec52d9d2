//! Pairwise (cascade) summation.
//!
//! Items are split recursively into halves down to blocks of [`BLOCK`] items,
//! which are accumulated left to right. The reduction tree depends only on the
//! item count, so results are reproducible regardless of threading.

const BLOCK: usize = 16;

/// Pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().fold(0.0, |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `count` vectors of length `width`.
///
/// `add(i, acc)` must add item `i` into `acc`.
pub fn pairwise_accumulate<F>(count: usize, width: usize, add: &F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]),
{
    let mut acc = vec![0.0; width];
    accumulate_range(0, count, &mut acc, add);
    acc
}

fn accumulate_range<F>(start: usize, end: usize, acc: &mut [f64], add: &F)
where
    F: Fn(usize, &mut [f64]),
{
    let len = end - start;
    if len <= BLOCK {
        for i in start..end {
            add(i, acc);
        }
        return;
    }
    let mid = start + len / 2;
    accumulate_range(start, mid, acc, add);
    let mut right = vec![0.0; acc.len()];
    accumulate_range(mid, end, &mut right, add);
    for (a, r) in acc.iter_mut().zip(&right) {
        *a += r;
    }
}

/// Pairwise reduction of already-summed vectors, in slice order.
pub fn pairwise_add_vectors(parts: &[Vec<f64>], width: usize) -> Vec<f64> {
    pairwise_accumulate(parts.len(), width, &|i, acc: &mut [f64]| {
        for (a, v) in acc.iter_mut().zip(&parts[i]) {
            *a += v;
        }
    })
}
