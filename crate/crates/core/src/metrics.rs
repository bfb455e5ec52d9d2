//! Threshold-free and thresholded evaluation of OOD scores.
//!
//! Higher scores mean "more out-of-domain". Equal scores always form one
//! threshold level: no metric depends on the order of tied scores.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores of in-domain and out-of-domain test utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScores {
    pub id_scores: Vec<f64>,
    pub ood_scores: Vec<f64>,
}

/// Which side counts as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positive {
    Id,
    Ood,
}

impl LabeledScores {
    pub fn new(id_scores: Vec<f64>, ood_scores: Vec<f64>) -> Result<Self> {
        let s = LabeledScores { id_scores, ood_scores };
        s.check()?;
        Ok(s)
    }

    /// The same scores with the two sides exchanged.
    pub fn swapped(&self) -> Self {
        LabeledScores { id_scores: self.ood_scores.clone(), ood_scores: self.id_scores.clone() }
    }

    fn check(&self) -> Result<()> {
        if self.id_scores.is_empty() {
            return Err(Error::EmptyScores { side: "ID" });
        }
        if self.ood_scores.is_empty() {
            return Err(Error::EmptyScores { side: "OOD" });
        }
        if self.id_scores.iter().chain(&self.ood_scores).any(|v| !v.is_finite()) {
            return Err(Error::data("scores must be finite"));
        }
        Ok(())
    }

    /// Distinct pooled scores ascending, with the ID and OOD count at each.
    fn levels(&self) -> Result<Vec<Level>> {
        self.check()?;
        let mut pooled: Vec<(f64, bool)> = self
            .id_scores
            .iter()
            .map(|&s| (s, false))
            .chain(self.ood_scores.iter().map(|&s| (s, true)))
            .collect();
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut levels: Vec<Level> = Vec::new();
        for (s, is_ood) in pooled {
            // -0.0 and 0.0 are the same threshold level
            match levels.last_mut() {
                Some(l) if l.score == s => l.add(is_ood),
                _ => {
                    let mut l = Level { score: s, id: 0, ood: 0 };
                    l.add(is_ood);
                    levels.push(l);
                }
            }
        }
        Ok(levels)
    }
}

#[derive(Debug, Clone, Copy)]
struct Level {
    score: f64,
    id: u64,
    ood: u64,
}

impl Level {
    fn add(&mut self, is_ood: bool) {
        if is_ood {
            self.ood += 1;
        } else {
            self.id += 1;
        }
    }
}

/// Probability that a random ID score is below a random OOD score, ties
/// counting one half. Computed exactly in integers from tie groups.
pub fn auroc(s: &LabeledScores) -> Result<f64> {
    let levels = s.levels()?;
    let (mut id_below, mut twice_wins) = (0u128, 0u128);
    for l in &levels {
        twice_wins += 2 * u128::from(l.ood) * id_below + u128::from(l.ood) * u128::from(l.id);
        id_below += u128::from(l.id);
    }
    let pairs = 2 * s.id_scores.len() as u128 * s.ood_scores.len() as u128;
    Ok(twice_wins as f64 / pairs as f64)
}

/// Average precision: precision at each threshold level weighted by the
/// recall it adds. Positives are ranked first (descending scores for OOD,
/// ascending for ID).
pub fn aupr(s: &LabeledScores, positive: Positive) -> Result<f64> {
    let mut levels = s.levels()?;
    if positive == Positive::Ood {
        levels.reverse();
    }
    let total_pos = match positive {
        Positive::Ood => s.ood_scores.len(),
        Positive::Id => s.id_scores.len(),
    } as f64;
    let (mut tp, mut fp, mut ap) = (0u64, 0u64, 0.0);
    for l in &levels {
        let (p, n) = match positive {
            Positive::Ood => (l.ood, l.id),
            Positive::Id => (l.id, l.ood),
        };
        tp += p;
        fp += n;
        if p > 0 {
            ap += p as f64 * (tp as f64 / (tp + fp) as f64);
        }
    }
    // each precision is at most 1, so only rounding can push this past 1
    Ok((ap / total_pos).min(1.0))
}

/// A concrete threshold with the rates it produces under [`decide`].
///
/// [`decide`]: crate::detectors::decide
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Every achievable operating point, one per cut between threshold levels.
///
/// Cut `j` rejects (predicts OOD for) the scores at levels `j..`. Its
/// threshold lies strictly between levels `j-1` and `j`, so
/// `score >= threshold` rejects exactly those scores.
pub fn operating_points(s: &LabeledScores, positive: Positive) -> Result<Vec<OperatingPoint>> {
    let levels = s.levels()?;
    let (n_id, n_ood) = (s.id_scores.len() as u64, s.ood_scores.len() as u64);
    let mut points = Vec::with_capacity(levels.len() + 1);
    let (mut id_below, mut ood_below) = (0u64, 0u64);
    for j in 0..=levels.len() {
        let threshold = cut_threshold(&levels, j);
        let (tp, fp, pos, neg) = match positive {
            Positive::Ood => (n_ood - ood_below, n_id - id_below, n_ood, n_id),
            Positive::Id => (id_below, ood_below, n_id, n_ood),
        };
        points.push(OperatingPoint {
            threshold,
            tpr: tp as f64 / pos as f64,
            fpr: fp as f64 / neg as f64,
        });
        if let Some(l) = levels.get(j) {
            id_below += l.id;
            ood_below += l.ood;
        }
    }
    Ok(points)
}

fn cut_threshold(levels: &[Level], j: usize) -> f64 {
    match (j.checked_sub(1).map(|i| levels[i].score), levels.get(j).map(|l| l.score)) {
        (None, Some(hi)) => hi,
        (Some(lo), None) => lo + lo.abs().max(1.0),
        (Some(lo), Some(hi)) => {
            let mid = lo / 2.0 + hi / 2.0;
            // adjacent floats: the midpoint may round onto the lower level
            if mid > lo { mid } else { hi }
        }
        (None, None) => 0.0,
    }
}

/// The operating point with the smallest TPR that is still `>= level`;
/// among equal TPRs the smaller FPR wins.
pub fn threshold_at_tpr(s: &LabeledScores, level: f64, positive: Positive) -> Result<OperatingPoint> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid(format!("TPR level must lie in (0, 1], got {level}")));
    }
    operating_points(s, positive)?
        .into_iter()
        .filter(|p| p.tpr >= level)
        .min_by(|a, b| a.tpr.total_cmp(&b.tpr).then(a.fpr.total_cmp(&b.fpr)))
        .ok_or_else(|| Error::invalid("no threshold reaches the requested TPR"))
}

pub fn fpr_at_tpr(s: &LabeledScores, level: f64, positive: Positive) -> Result<f64> {
    Ok(threshold_at_tpr(s, level, positive)?.fpr)
}

/// The four headline metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub aupr_ood: f64,
    pub fpr95_ood: f64,
    pub fpr95_id: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 4] = ["auroc", "aupr_ood", "fpr95_ood", "fpr95_id"];

    pub fn values(&self) -> [f64; 4] {
        [self.auroc, self.aupr_ood, self.fpr95_ood, self.fpr95_id]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Metrics { auroc: v[0], aupr_ood: v[1], fpr95_ood: v[2], fpr95_id: v[3] }
    }
}

/// Computes [`Metrics`] with FPR taken at `tpr_level`.
pub fn evaluate(s: &LabeledScores, tpr_level: f64) -> Result<Metrics> {
    Ok(Metrics {
        auroc: auroc(s)?,
        aupr_ood: aupr(s, Positive::Ood)?,
        fpr95_ood: fpr_at_tpr(s, tpr_level, Positive::Ood)?,
        fpr95_id: fpr_at_tpr(s, tpr_level, Positive::Id)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Per-seed rows of one detector variant and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: String,
    pub per_seed: Vec<SeedMetrics>,
    pub mean: Metrics,
    /// Sample standard deviation over seeds; 0 for a single seed.
    pub std: Metrics,
}

impl VariantReport {
    pub fn new(variant: impl Into<String>, per_seed: Vec<SeedMetrics>) -> Result<Self> {
        if per_seed.is_empty() {
            return Err(Error::invalid("a report needs at least one seed"));
        }
        let n = per_seed.len() as f64;
        let mut mean = [0.0; 4];
        for row in &per_seed {
            for (m, v) in mean.iter_mut().zip(row.metrics.values()) {
                *m += v / n;
            }
        }
        let mut std = [0.0; 4];
        if per_seed.len() > 1 {
            for row in &per_seed {
                for ((s, v), m) in std.iter_mut().zip(row.metrics.values()).zip(mean) {
                    *s += (v - m) * (v - m);
                }
            }
            for s in &mut std {
                *s = (*s / (n - 1.0)).sqrt();
            }
        }
        Ok(VariantReport {
            variant: variant.into(),
            per_seed,
            mean: Metrics::from_values(mean),
            std: Metrics::from_values(std),
        })
    }
}

/// Evaluation results for every requested variant, with the configuration
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub tpr_level: f64,
    pub seeds: Vec<u64>,
    pub variants: Vec<VariantReport>,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per (variant, seed) plus `mean` and `std` rows. Headline
    /// columns are percentages with one decimal; `*_raw` columns keep full
    /// precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,seed");
        for name in Metrics::NAMES {
            let _ = write!(out, ",{name}");
        }
        for name in Metrics::NAMES {
            let _ = write!(out, ",{name}_raw");
        }
        out.push('\n');
        for v in &self.variants {
            let rows = v
                .per_seed
                .iter()
                .map(|r| (r.seed.to_string(), r.metrics))
                .chain([("mean".to_owned(), v.mean), ("std".to_owned(), v.std)]);
            for (label, m) in rows {
                let _ = write!(out, "{},{label}", v.variant);
                for x in m.values() {
                    let _ = write!(out, ",{:.1}", 100.0 * x);
                }
                for x in m.values() {
                    let _ = write!(out, ",{x:?}");
                }
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{decide, Verdict};
    use proptest::prelude::*;

    fn ls(id: &[f64], ood: &[f64]) -> LabeledScores {
        LabeledScores::new(id.to_vec(), ood.to_vec()).unwrap()
    }

    fn brute_auroc(s: &LabeledScores) -> f64 {
        let mut twice = 0u128;
        for &i in &s.id_scores {
            for &o in &s.ood_scores {
                twice += if i < o { 2 } else if i == o { 1 } else { 0 };
            }
        }
        twice as f64 / (2 * s.id_scores.len() * s.ood_scores.len()) as f64
    }

    /// Rates of the rule "positive=OOD iff score >= t" (or "positive=ID iff
    /// score < t") evaluated directly for a candidate threshold.
    fn rates(s: &LabeledScores, t: f64, positive: Positive) -> (f64, f64) {
        let frac = |v: &[f64], f: &dyn Fn(f64) -> bool| {
            v.iter().filter(|&&x| f(x)).count() as f64 / v.len() as f64
        };
        match positive {
            Positive::Ood => (frac(&s.ood_scores, &|x| x >= t), frac(&s.id_scores, &|x| x >= t)),
            Positive::Id => (frac(&s.id_scores, &|x| x < t), frac(&s.ood_scores, &|x| x < t)),
        }
    }

    /// Candidate thresholds: every pooled score plus one above the maximum.
    fn candidates(s: &LabeledScores) -> Vec<f64> {
        let mut c: Vec<f64> = s.id_scores.iter().chain(&s.ood_scores).copied().collect();
        let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        c.push(max + max.abs().max(1.0));
        c
    }

    fn brute_fpr(s: &LabeledScores, x: f64, positive: Positive) -> f64 {
        let mut best: Option<(f64, f64)> = None;
        for t in candidates(s) {
            let (tpr, fpr) = rates(s, t, positive);
            if tpr >= x && best.is_none_or(|(bt, bf)| tpr < bt || (tpr == bt && fpr < bf)) {
                best = Some((tpr, fpr));
            }
        }
        best.unwrap().1
    }

    fn brute_aupr(s: &LabeledScores, positive: Positive) -> f64 {
        let mut thresholds = candidates(s);
        thresholds.pop();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        if positive == Positive::Ood {
            thresholds.reverse();
        }
        let (pos, neg) = match positive {
            Positive::Ood => (&s.ood_scores, &s.id_scores),
            Positive::Id => (&s.id_scores, &s.ood_scores),
        };
        let inside = |x: f64, t: f64| match positive {
            Positive::Ood => x >= t,
            Positive::Id => x <= t,
        };
        let (mut ap, mut prev_tp) = (0.0, 0usize);
        for t in thresholds {
            let tp = pos.iter().filter(|&&x| inside(x, t)).count();
            let fp = neg.iter().filter(|&&x| inside(x, t)).count();
            if tp > prev_tp {
                ap += ((tp - prev_tp) as f64 / pos.len() as f64) * (tp as f64 / (tp + fp) as f64);
            }
            prev_tp = tp;
        }
        ap
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&ls(&[1.0, 2.0], &[3.0, 4.0])).unwrap(), 1.0);
        assert_eq!(auroc(&ls(&[5.0, 5.0], &[5.0, 5.0])).unwrap(), 0.5);
        assert_eq!(auroc(&ls(&[0.1, 0.4], &[0.3, 0.9])).unwrap(), 0.75);
    }

    #[test]
    fn aupr_examples() {
        assert_eq!(aupr(&ls(&[1.0, 2.0], &[3.0, 4.0]), Positive::Ood).unwrap(), 1.0);
        let flat = ls(&[2.0; 7], &[2.0; 3]);
        assert!((aupr(&flat, Positive::Ood).unwrap() - 0.3).abs() < 1e-15);
        assert!((aupr(&flat, Positive::Id).unwrap() - 0.7).abs() < 1e-15);
        let ap = aupr(&ls(&[0.1, 0.4], &[0.3, 0.9]), Positive::Ood).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn fpr_examples() {
        let sep = ls(&[1.0, 2.0], &[3.0, 4.0]);
        for p in [Positive::Id, Positive::Ood] {
            assert_eq!(fpr_at_tpr(&sep, 0.95, p).unwrap(), 0.0);
            assert_eq!(fpr_at_tpr(&ls(&[1.0; 4], &[1.0; 3]), 0.95, p).unwrap(), 1.0);
        }
    }

    #[test]
    fn ramp_with_single_ood_point() {
        let id: Vec<f64> = (1..=20).map(f64::from).collect();
        // 19 of 20 ID points lie below 19.5, so TPR 0.95 costs no false positive
        let s = ls(&id, &[19.5]);
        let p = threshold_at_tpr(&s, 0.95, Positive::Id).unwrap();
        assert_eq!((p.tpr, p.fpr), (0.95, 0.0));
        assert_eq!(p.fpr, brute_fpr(&s, 0.95, Positive::Id));
        assert_eq!(p.threshold, 19.25);
        // below the 19th ID point the OOD score has to be accepted
        let s = ls(&id, &[18.5]);
        assert_eq!(fpr_at_tpr(&s, 0.95, Positive::Id).unwrap(), 1.0);
        assert_eq!(brute_fpr(&s, 0.95, Positive::Id), 1.0);
    }

    #[test]
    fn separating_gap_midpoint() {
        let s = ls(&[1.0, 2.0], &[4.0, 5.0]);
        assert_eq!(threshold_at_tpr(&s, 0.95, Positive::Ood).unwrap().threshold, 3.0);
        let single = ls(&[1.0, 2.0, 7.0], &[6.0]);
        let p = threshold_at_tpr(&single, 0.95, Positive::Ood).unwrap();
        assert!(p.threshold <= 6.0);
        assert_eq!(p.tpr, 1.0);
    }

    #[test]
    fn adjacent_floats_keep_threshold_strict() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let s = ls(&[lo], &[hi]);
        let p = threshold_at_tpr(&s, 1.0, Positive::Ood).unwrap();
        assert_eq!((p.tpr, p.fpr), (1.0, 0.0));
        assert_eq!(decide(lo, p.threshold).verdict, Verdict::Accept);
        assert_eq!(decide(hi, p.threshold).verdict, Verdict::Reject);
    }

    #[test]
    fn empty_and_invalid_inputs() {
        let s = LabeledScores { id_scores: vec![], ood_scores: vec![1.0] };
        assert!(matches!(auroc(&s), Err(Error::EmptyScores { side: "ID" })));
        let s = LabeledScores { id_scores: vec![1.0], ood_scores: vec![] };
        assert!(matches!(aupr(&s, Positive::Ood), Err(Error::EmptyScores { side: "OOD" })));
        assert!(LabeledScores::new(vec![f64::NAN], vec![1.0]).is_err());
        let s = ls(&[1.0], &[2.0]);
        assert!(fpr_at_tpr(&s, 0.0, Positive::Ood).is_err());
        assert!(fpr_at_tpr(&s, 1.5, Positive::Ood).is_err());
    }

    #[test]
    fn report_aggregates_and_csv() {
        let m = |a| Metrics { auroc: a, aupr_ood: 0.5, fpr95_ood: 0.25, fpr95_id: 0.125 };
        let rows = vec![
            SeedMetrics { seed: 0, metrics: m(0.9) },
            SeedMetrics { seed: 1, metrics: m(0.8) },
        ];
        let v = VariantReport::new("maha", rows).unwrap();
        assert!((v.mean.auroc - 0.85).abs() < 1e-15);
        assert!((v.std.auroc - 0.05f64.sqrt() / 10.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(v.std.aupr_ood, 0.0);
        let report = EvalReport {
            dataset: "toy".into(),
            tpr_level: 0.95,
            seeds: vec![0, 1],
            variants: vec![v],
            config: serde_json::Value::Null,
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("variant,seed,auroc,aupr_ood,fpr95_ood,fpr95_id,auroc_raw"));
        assert_eq!(lines[1], "maha,0,90.0,50.0,25.0,12.5,0.9,0.5,0.25,0.125");
        assert!(lines[3].starts_with("maha,mean,85.0,"));
        let back: EvalReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    fn scores() -> impl Strategy<Value = LabeledScores> {
        // coarse grid so that ties are common
        let v = || prop::collection::vec((-20i32..20).prop_map(|k| f64::from(k) / 4.0), 1..60);
        (v(), v()).prop_map(|(id_scores, ood_scores)| LabeledScores { id_scores, ood_scores })
    }

    proptest! {
        #[test]
        fn matches_brute_force(s in scores()) {
            prop_assert_eq!(auroc(&s).unwrap(), brute_auroc(&s));
            for p in [Positive::Id, Positive::Ood] {
                prop_assert!((aupr(&s, p).unwrap() - brute_aupr(&s, p)).abs() < 1e-12);
                for x in [0.5, 0.9, 0.95, 1.0] {
                    prop_assert_eq!(fpr_at_tpr(&s, x, p).unwrap(), brute_fpr(&s, x, p));
                }
            }
        }

        #[test]
        fn swap_symmetry(s in scores()) {
            prop_assert_eq!(auroc(&s).unwrap() + auroc(&s.swapped()).unwrap(), 1.0);
        }

        #[test]
        fn monotone_transform_invariance(s in scores()) {
            let f = |v: &Vec<f64>| v.iter().map(|x| (x / 3.0).exp() * 7.0 - 2.0).collect();
            let t = LabeledScores { id_scores: f(&s.id_scores), ood_scores: f(&s.ood_scores) };
            prop_assert_eq!(evaluate(&s, 0.95).unwrap(), evaluate(&t, 0.95).unwrap());
        }

        #[test]
        fn fpr_monotone_in_level(s in scores()) {
            for p in [Positive::Id, Positive::Ood] {
                let mut prev = 0.0;
                for k in 1..=20 {
                    let f = fpr_at_tpr(&s, f64::from(k) / 20.0, p).unwrap();
                    prop_assert!(f >= prev);
                    prev = f;
                }
            }
        }

        #[test]
        fn threshold_round_trips_through_decide(s in scores(), x in 0.01f64..1.0) {
            for p in [Positive::Id, Positive::Ood] {
                let op = threshold_at_tpr(&s, x, p).unwrap();
                let rejected = |v: &[f64]| {
                    v.iter().filter(|&&y| decide(y, op.threshold).verdict == Verdict::Reject).count()
                };
                let (pos, neg) = match p {
                    Positive::Ood => (&s.ood_scores, &s.id_scores),
                    Positive::Id => (&s.id_scores, &s.ood_scores),
                };
                let (tp, fp) = match p {
                    Positive::Ood => (rejected(pos), rejected(neg)),
                    Positive::Id => (pos.len() - rejected(pos), neg.len() - rejected(neg)),
                };
                prop_assert_eq!(tp as f64 / pos.len() as f64, op.tpr);
                prop_assert_eq!(fp as f64 / neg.len() as f64, op.fpr);
            }
        }
    }
}
