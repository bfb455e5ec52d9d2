//! Fixtures shared by the benchmarks.

use oodkit_core::dataio::{generate_synthetic, SynthData, SynthSpec};
use oodkit_core::metrics::LabeledScores;

/// The default synthetic benchmark at a given width.
pub fn workload(dim: usize) -> SynthData {
    generate_synthetic(&SynthSpec { dim, ..SynthSpec::default() }).expect("valid synthetic spec")
}

/// Interleaved scores with many ties, `n` per side.
pub fn score_set(n: usize) -> LabeledScores {
    let id = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 10.0).collect();
    let ood = (0..n).map(|i| ((i * 104_729) % 1000) as f64 / 10.0 + 20.0).collect();
    LabeledScores::new(id, ood).expect("non-empty finite scores")
}
