use serde::{Deserialize, Serialize};

use super::CohortPredictions;
use crate::error::Result;
use crate::fusion::THRESHOLD_CLAMP;
use crate::scalar::{total_cmp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    Youden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecisionThreshold<T> {
    pub value: T,
    pub method: ThresholdMethod,
    pub source_cohort: String,
    /// Youden's J reached on the source cohort.
    pub j: T,
}

/// `(tp, fp)` when slides with `score >= threshold` are called melanoma.
fn confusion<T: Scalar>(pos: &[T], neg: &[T], threshold: T) -> (usize, usize) {
    let above = |sorted: &[T]| sorted.len() - sorted.partition_point(|&s| s < threshold);
    (above(pos), above(neg))
}

/// Youden's J of the decision `score >= threshold`.
pub fn youden_j<T: Scalar>(cohort: &CohortPredictions<T>, threshold: T) -> Result<T> {
    let (p, n) = cohort.require_both_classes()?;
    let tp = cohort
        .entries
        .iter()
        .filter(|e| e.label.is_positive() && e.score >= threshold)
        .count();
    let fp = cohort
        .entries
        .iter()
        .filter(|e| !e.label.is_positive() && e.score >= threshold)
        .count();
    Ok(T::from_usize_exact(tp) / T::from_usize_exact(p) - T::from_usize_exact(fp) / T::from_usize_exact(n))
}

/// Candidate thresholds: midpoints between consecutive distinct scores plus
/// one sentinel below the lowest and one above the highest score, all kept
/// inside `[1e-6, 1 - 1e-6]`. Ascending.
pub(crate) fn candidates<T: Scalar>(scores: &mut Vec<T>) -> Vec<T> {
    scores.sort_by(total_cmp);
    scores.dedup();
    let half = T::lit(0.5);
    let lo = T::lit(THRESHOLD_CLAMP);
    let hi = T::one() - lo;
    let mut out = Vec::with_capacity(scores.len() + 1);
    out.push(scores[0] * half);
    out.extend(scores.windows(2).map(|w| (w[0] + w[1]) * half));
    out.push((scores[scores.len() - 1] + T::one()) * half);
    for c in &mut out {
        *c = c.max(lo).min(hi);
    }
    out.dedup();
    out
}

/// Threshold maximizing Youden's J; ties go to the smallest candidate.
pub fn select_threshold<T: Scalar>(cohort: &CohortPredictions<T>) -> Result<DecisionThreshold<T>> {
    let (p, n) = cohort.require_both_classes()?;
    let mut pos: Vec<T> = Vec::with_capacity(p);
    let mut neg: Vec<T> = Vec::with_capacity(n);
    for e in &cohort.entries {
        if e.label.is_positive() { pos.push(e.score) } else { neg.push(e.score) }
    }
    pos.sort_by(total_cmp);
    neg.sort_by(total_cmp);
    let mut all: Vec<T> = cohort.entries.iter().map(|e| e.score).collect();
    // compare J exactly: tp/p - fp/n  ~  tp*n - fp*p
    let mut best: Option<(i128, T)> = None;
    for c in candidates(&mut all) {
        let (tp, fp) = confusion(&pos, &neg, c);
        let j = tp as i128 * n as i128 - fp as i128 * p as i128;
        if best.is_none_or(|(b, _)| j > b) {
            best = Some((j, c));
        }
    }
    let (j, value) = best.expect("at least two candidates");
    Ok(DecisionThreshold {
        value,
        method: ThresholdMethod::Youden,
        source_cohort: cohort.cohort_id.clone(),
        j: T::lit(j as f64) / T::lit((p * n) as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CohortEntry;
    use crate::labels::BinaryLabel::{Melanoma, Nevus};
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

    #[test]
    fn separable_midpoint() {
        let t = select_threshold(&cohort(&[0.9], &[0.1])).unwrap();
        assert_eq!(t.value, 0.5);
        assert_eq!(t.j, 1.0);
        assert_eq!(t.method, ThresholdMethod::Youden);
    }

    #[test]
    fn all_ties_returns_smallest_candidate() {
        let t = select_threshold(&cohort(&[0.4, 0.4], &[0.4])).unwrap();
        assert_eq!(t.j, 0.0);
        assert_eq!(t.value, 0.2);
    }

    #[test]
    fn smallest_argmax() {
        let c = cohort(&[0.8, 0.4], &[0.6, 0.2]);
        let mut scores: Vec<f64> = c.entries.iter().map(|e| e.score).collect();
        let cands = candidates(&mut scores);
        assert!((cands[1] - 0.3).abs() < 1e-15 && (cands[2] - 0.5).abs() < 1e-15);
        let j: Vec<f64> = cands.iter().map(|&t| youden_j(&c, t).unwrap()).collect();
        // sentinels 0.1 and 0.9, midpoints 0.3, 0.5, 0.7
        assert_eq!(j, vec![0.0, 0.5, 0.0, 0.5, 0.0]);
        let t = select_threshold(&c).unwrap();
        assert!((t.value - 0.3).abs() < 1e-15);
        assert_eq!(t.j, 0.5);
    }

    #[test]
    fn extremes_are_clamped() {
        let t = select_threshold(&cohort(&[1.0], &[1.0])).unwrap();
        assert!(t.value > 0.0 && t.value < 1.0);
    }

    proptest! {
        #[test]
        fn beats_every_candidate(
            raw in prop::collection::vec((0u8..15, any::<bool>()), 2..40)
        ) {
            let entries: Vec<_> = raw.iter().enumerate().map(|(i, &(l, p))| {
                CohortEntry::new(format!("s{i}"), l as f64 / 14.0, if p { Melanoma } else { Nevus })
            }).collect();
            let c = CohortPredictions::new("r", entries).unwrap();
            let (p, n) = c.class_counts();
            prop_assume!(p > 0 && n > 0);
            let t = select_threshold(&c).unwrap();
            let best = youden_j(&c, t.value).unwrap();
            let mut scores: Vec<f64> = c.entries.iter().map(|e| e.score).collect();
            for cand in candidates(&mut scores) {
                let j = youden_j(&c, cand).unwrap();
                prop_assert!(best >= j - 1e-12);
                if cand < t.value { prop_assert!(j < best - 1e-12); }
            }
        }
    }
}
