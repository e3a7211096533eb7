use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CohortPredictions;
use crate::error::{Error, Result};
use crate::scalar::{total_cmp, Scalar};
use crate::stats::{percentile_interval, replicate, BootstrapConfig, Interval};

/// Positive and negative counts per distinct score, ascending by score.
fn tie_groups<T: Scalar>(scored: impl Iterator<Item = (T, bool)>) -> Vec<(T, u64, u64)> {
    let mut items: Vec<(T, bool)> = scored.collect();
    items.sort_by(|a, b| total_cmp(&a.0, &b.0));
    let mut groups: Vec<(T, u64, u64)> = Vec::new();
    for (s, positive) in items {
        match groups.last_mut() {
            Some(g) if g.0 == s => {
                if positive { g.1 += 1 } else { g.2 += 1 }
            }
            _ => groups.push((s, positive as u64, !positive as u64)),
        }
    }
    groups
}

/// Twice the Mann-Whitney U over tie groups (`p`, `n`) in ascending order.
fn twice_u(groups: impl Iterator<Item = (u64, u64)>) -> (u64, u64, u64) {
    let (mut u2, mut pos, mut neg) = (0u64, 0u64, 0u64);
    for (p, n) in groups {
        u2 += p * (2 * neg + n);
        pos += p;
        neg += n;
    }
    (u2, pos, neg)
}

fn ratio<T: Scalar>(u2: u64, pos: u64, neg: u64) -> T {
    // exact integers up to 2^53 in f64
    T::lit(u2 as f64) / T::lit((2 * pos * neg) as f64)
}

/// Probability that a random melanoma outscores a random nevus, ties
/// credited one half.
pub fn auroc<T: Scalar>(cohort: &CohortPredictions<T>) -> Result<T> {
    cohort.require_both_classes()?;
    let groups = tie_groups(cohort.entries.iter().map(|e| (e.score, e.label.is_positive())));
    let (u2, pos, neg) = twice_u(groups.iter().map(|g| (g.1, g.2)));
    Ok(ratio(u2, pos, neg))
}

/// ROC points `(fpr, tpr)` from (0,0) to (1,1). Tied scores form one step;
/// points on a straight segment are merged.
pub fn roc_curve<T: Scalar>(cohort: &CohortPredictions<T>) -> Result<Vec<(T, T)>> {
    let (pos, neg) = cohort.require_both_classes()?;
    let groups = tie_groups(cohort.entries.iter().map(|e| (e.score, e.label.is_positive())));
    let (p, n) = (T::from_usize_exact(pos), T::from_usize_exact(neg));
    // integer (fp, tp) vertices; collinear interior points are dropped
    let mut vertices: Vec<(u64, u64)> = vec![(0, 0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for g in groups.iter().rev() {
        tp += g.1;
        fp += g.2;
        if vertices.len() >= 2 {
            let (a, b) = (vertices[vertices.len() - 2], vertices[vertices.len() - 1]);
            let cross = (b.0 - a.0) as i128 * (tp - b.1) as i128 - (b.1 - a.1) as i128 * (fp - b.0) as i128;
            if cross == 0 {
                vertices.pop();
            }
        }
        vertices.push((fp, tp));
    }
    Ok(vertices
        .into_iter()
        .map(|(fp, tp)| (T::lit(fp as f64) / n, T::lit(tp as f64) / p))
        .collect())
}

/// Trapezoidal area under a curve of `(x, y)` points.
pub fn trapezoid<T: Scalar>(curve: &[(T, T)]) -> T {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * T::lit(0.5))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AurocCi<T> {
    pub ci: Interval<T>,
    /// Replicates that drew a single class.
    pub n_dropped: usize,
}

/// Percentile bootstrap over slides. Replicates with only one class are
/// dropped; more than half dropped is an error.
pub fn auroc_ci<T: Scalar>(cohort: &CohortPredictions<T>, config: &BootstrapConfig) -> Result<AurocCi<T>> {
    config.validate()?;
    cohort.require_both_classes()?;
    // Fix the resampling frame independently of input order.
    let mut by_id: Vec<_> = cohort.entries.iter().collect();
    by_id.sort_by(|a, b| a.slide_id.cmp(&b.slide_id));
    // rank of each slide's score among the distinct levels
    let mut levels: Vec<T> = by_id.iter().map(|e| e.score).collect();
    levels.sort_by(total_cmp);
    levels.dedup();
    let slots: Vec<(usize, bool)> = by_id
        .iter()
        .map(|e| {
            let rank = levels.partition_point(|&l| l < e.score);
            (rank, e.label.is_positive())
        })
        .collect();
    let n = slots.len();
    let k = levels.len();

    let replicates: Vec<Option<T>> = replicate(config, |rng| {
        let mut counts = vec![(0u64, 0u64); k];
        for _ in 0..n {
            let (rank, positive) = slots[rng.random_range(0..n)];
            if positive { counts[rank].0 += 1 } else { counts[rank].1 += 1 }
        }
        let (u2, pos, neg) = twice_u(counts.into_iter());
        (pos > 0 && neg > 0).then(|| ratio(u2, pos, neg))
    });
    let mut kept: Vec<T> = replicates.into_iter().flatten().collect();
    let n_dropped = config.n_boot - kept.len();
    if 2 * n_dropped > config.n_boot {
        return Err(Error::BootstrapDegenerate {
            dropped: n_dropped,
            n_boot: config.n_boot,
        });
    }
    Ok(AurocCi {
        ci: percentile_interval(&mut kept, config.alpha),
        n_dropped,
    })
}

/// True iff 0.5 lies outside the interval (bounds inclusive).
pub fn significance_vs_random<T: Scalar>(ci: &Interval<T>) -> bool {
    !ci.contains(T::lit(0.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RocResult<T> {
    pub cohort_id: String,
    pub auroc: T,
    pub curve: Vec<(T, T)>,
    pub ci: Interval<T>,
    pub n: usize,
    pub n_boot: usize,
    pub seed: u64,
    pub n_dropped_replicates: usize,
}

impl<T: Scalar> RocResult<T> {
    pub fn significant(&self) -> bool {
        significance_vs_random(&self.ci)
    }
}

pub fn evaluate_cohort<T: Scalar>(cohort: &CohortPredictions<T>, config: &BootstrapConfig) -> Result<RocResult<T>> {
    let boot = auroc_ci(cohort, config)?;
    Ok(RocResult {
        cohort_id: cohort.cohort_id.clone(),
        auroc: auroc(cohort)?,
        curve: roc_curve(cohort)?,
        ci: boot.ci,
        n: cohort.len(),
        n_boot: config.n_boot,
        seed: config.seed,
        n_dropped_replicates: boot.n_dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CohortEntry;
    use crate::labels::BinaryLabel::{Melanoma, Nevus};
    use crate::labels::BinaryLabel;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn cohort(pos: &[f64], neg: &[f64]) -> CohortPredictions<f64> {
        let mut entries = Vec::new();
        for (i, &s) in pos.iter().enumerate() {
            entries.push(CohortEntry::new(format!("p{i}"), s, Melanoma));
        }
        for (i, &s) in neg.iter().enumerate() {
            entries.push(CohortEntry::new(format!("n{i}"), s, Nevus));
        }
        CohortPredictions::new("c", entries).unwrap()
    }

    fn brute_force(c: &CohortPredictions<f64>) -> Ratio<u64> {
        let mut twice = 0u64;
        let (mut p, mut n) = (0u64, 0u64);
        for a in c.entries.iter().filter(|e| e.label.is_positive()) {
            p += 1;
            for b in c.entries.iter().filter(|e| !e.label.is_positive()) {
                twice += if a.score > b.score { 2 } else if a.score == b.score { 1 } else { 0 };
            }
        }
        n += c.entries.len() as u64 - p;
        Ratio::new(twice, 2 * p * n)
    }

    #[test]
    fn examples() {
        assert_eq!(auroc(&cohort(&[0.9], &[0.1])).unwrap(), 1.0);
        assert_eq!(auroc(&cohort(&[0.3, 0.3], &[0.3, 0.3, 0.3])).unwrap(), 0.5);
        let c = cohort(&[0.8, 0.4], &[0.6, 0.2]);
        assert_eq!(auroc(&c).unwrap(), 0.75);
        assert_eq!(brute_force(&c), Ratio::new(3, 4));
    }

    #[test]
    fn single_class_is_undefined() {
        let err = auroc(&cohort(&[0.9, 0.2], &[])).unwrap_err();
        assert!(err.to_string().contains("AUROC undefined"));
        assert!(roc_curve(&cohort(&[], &[0.2])).is_err());
    }

    #[test]
    fn curves() {
        let perfect = roc_curve(&cohort(&[0.9, 0.8], &[0.1])).unwrap();
        assert_eq!(perfect, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        let ties = roc_curve(&cohort(&[0.4], &[0.4])).unwrap();
        assert_eq!(ties, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(trapezoid(&ties), 0.5);
        let c = cohort(&[0.8, 0.4], &[0.6, 0.2]);
        assert_eq!(trapezoid(&roc_curve(&c).unwrap()), 0.75);
    }

    #[test]
    fn separated_cohort_has_degenerate_ci() {
        let pos: Vec<f64> = (0..20).map(|i| 0.6 + 0.01 * i as f64).collect();
        let neg: Vec<f64> = (0..20).map(|i| 0.1 + 0.01 * i as f64).collect();
        let out = auroc_ci(&cohort(&pos, &neg), &BootstrapConfig::new(2000, 3)).unwrap();
        assert_eq!(out.ci, Interval::new(1.0, 1.0));
    }

    #[test]
    fn single_replicate() {
        let c = cohort(&[0.8, 0.4, 0.7], &[0.6, 0.2, 0.5]);
        let mut seed = 0;
        // find a seed whose single replicate is not dropped
        let out = loop {
            match auroc_ci(&c, &BootstrapConfig::new(1, seed)) {
                Ok(out) => break out,
                Err(_) => seed += 1,
            }
        };
        assert_eq!(out.ci.low, out.ci.high);
        assert_eq!(out.n_dropped, 0);
    }

    #[test]
    fn tiny_cohort_is_degenerate() {
        // 1 + 1 slides: half of all replicates draw one class; a lone
        // single-class replicate is a 100% drop rate
        let c = cohort(&[0.8], &[0.2]);
        let err = (0..64)
            .find_map(|seed| auroc_ci(&c, &BootstrapConfig::new(1, seed)).err())
            .unwrap();
        assert!(matches!(err, Error::BootstrapDegenerate { dropped: 1, n_boot: 1 }));
        assert!(err.to_string().contains("too small/imbalanced"));
    }

    #[test]
    fn ci_ignores_entry_order() {
        let c = cohort(&[0.8, 0.4, 0.7, 0.66, 0.9], &[0.6, 0.2, 0.5, 0.3, 0.45, 0.7]);
        let mut rev = c.clone();
        rev.entries.reverse();
        let cfg = BootstrapConfig::new(500, 11);
        assert_eq!(auroc_ci(&c, &cfg).unwrap(), auroc_ci(&rev, &cfg).unwrap());
    }

    #[test]
    fn significance() {
        assert!(significance_vs_random(&Interval::new(0.64, 0.86)));
        assert!(!significance_vs_random(&Interval::new(0.45, 0.55)));
        assert!(!significance_vs_random(&Interval::new(0.5, 0.7)));
    }

    fn random_cohort() -> impl Strategy<Value = CohortPredictions<f64>> {
        prop::collection::vec((0u8..12, any::<bool>()), 2..50).prop_filter_map("two classes", |raw| {
            let entries: Vec<_> = raw
                .iter()
                .enumerate()
                .map(|(i, &(level, pos))| {
                    let label = if pos { BinaryLabel::Melanoma } else { BinaryLabel::Nevus };
                    CohortEntry::new(format!("s{i:02}"), level as f64 / 11.0, label)
                })
                .collect();
            let c = CohortPredictions::new("r", entries).unwrap();
            let (p, n) = c.class_counts();
            (p > 0 && n > 0).then_some(c)
        })
    }

    proptest! {
        #[test]
        fn matches_pair_counting(c in random_cohort()) {
            let oracle = brute_force(&c);
            let exact = *oracle.numer() as f64 / *oracle.denom() as f64;
            prop_assert!((auroc(&c).unwrap() - exact).abs() <= 1e-12);
            prop_assert!((trapezoid(&roc_curve(&c).unwrap()) - exact).abs() <= 1e-12);
        }

        #[test]
        fn flipped_labels_and_scores(c in random_cohort()) {
            let mut flipped = c.clone();
            for e in &mut flipped.entries {
                e.score = 1.0 - e.score;
                e.label = if e.label.is_positive() { Nevus } else { Melanoma };
            }
            prop_assert!((auroc(&flipped).unwrap() - auroc(&c).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn curve_is_monotone(c in random_cohort()) {
            let curve = roc_curve(&c).unwrap();
            prop_assert_eq!(curve[0], (0.0, 0.0));
            prop_assert_eq!(*curve.last().unwrap(), (1.0, 1.0));
            for w in curve.windows(2) {
                prop_assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
            }
        }
    }
}
