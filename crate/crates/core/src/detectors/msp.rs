use crate::error::{Error, Result};

/// Maximum softmax probability score with test-time temperature scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MspScorer {
    temperature: f64,
}

impl Default for MspScorer {
    fn default() -> Self {
        MspScorer { temperature: 1.0 }
    }
}

impl MspScorer {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::invalid(format!(
                "temperature must be finite and positive, got {temperature}"
            )));
        }
        Ok(MspScorer { temperature })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn score(&self, logits: &[f64]) -> Result<f64> {
        msp_score(logits, self.temperature)
    }
}

/// `1 - max_y softmax(z / tau)_y`.
///
/// With `m = max z`, the largest probability is `1 / S` where
/// `S = sum_y exp((z_y - m) / tau)`, so the score is `(S - 1) / S`. The
/// numerator is accumulated directly from the non-maximal terms, which keeps
/// confident predictions accurate instead of cancelling `1 - (1 - eps)`.
pub fn msp_score(logits: &[f64], temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::invalid(format!(
            "temperature must be finite and positive, got {temperature}"
        )));
    }
    if logits.len() < 2 {
        return Err(Error::invalid("softmax scoring needs at least two classes"));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::data("non-finite logit"));
    }
    let (arg, max) = logits
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, z)| if z > best.1 { (i, z) } else { best });
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &z)| ((z - max) / temperature).exp())
        .sum();
    Ok(rest / (1.0 + rest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        for n in 2..12 {
            let z = vec![3.25; n];
            let s = msp_score(&z, 1.0).unwrap();
            assert!((s - (1.0 - 1.0 / n as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn logistic_examples() {
        let oracle = |a: f64, b: f64| {
            let pa = 1.0 / (1.0 + (b - a).exp());
            1.0 - pa
        };
        let s = msp_score(&[10.0, 0.0], 1.0).unwrap();
        assert!((s - 4.539_786_870_243_439_5e-5).abs() < 1e-12);
        assert!((s - oracle(10.0, 0.0)).abs() < 1e-12);
        let s = msp_score(&[10.0, 0.0], 1000.0).unwrap();
        assert!((s - 0.497_500_020_833_125).abs() < 1e-12);
        assert!((s - oracle(0.01, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(msp_score(&[1.0, 2.0], 0.0).is_err());
        assert!(msp_score(&[1.0, 2.0], -1.0).is_err());
        assert!(msp_score(&[1.0], 1.0).is_err());
        assert!(msp_score(&[1.0, f64::NAN], 1.0).is_err());
        assert!(MspScorer::new(f64::INFINITY).is_err());
    }

    #[test]
    fn temperature_flattens_monotonically() {
        let z = [2.0, -1.0, 0.5, 0.0];
        let limit = 1.0 - 1.0 / 4.0;
        let mut prev = 0.0;
        for t in [0.1, 0.5, 1.0, 2.0, 10.0, 100.0, 1e4, 1e6] {
            let s = msp_score(&z, t).unwrap();
            assert!(s > prev && s < limit);
            prev = s;
        }
        assert!(limit - prev < 1e-5);
    }

    proptest! {
        #[test]
        fn shift_invariance_is_exact(
            raw in prop::collection::vec(-4096i32..4096, 2..20),
            shift in -4096i32..4096,
            t in 1u32..64,
        ) {
            // multiples of 1/64 keep z + c exact in binary floating point
            let z: Vec<f64> = raw.iter().map(|&v| f64::from(v) / 64.0).collect();
            let c = f64::from(shift) / 64.0;
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let tau = f64::from(t) / 8.0;
            prop_assert_eq!(msp_score(&z, tau).unwrap(), msp_score(&shifted, tau).unwrap());
        }

        #[test]
        fn score_in_range(z in prop::collection::vec(-50.0f64..50.0, 2..30), t in 0.01f64..100.0) {
            let s = msp_score(&z, t).unwrap();
            prop_assert!(s >= 0.0);
            prop_assert!(s <= 1.0 - 1.0 / z.len() as f64 + 1e-12);
        }
    }
}
