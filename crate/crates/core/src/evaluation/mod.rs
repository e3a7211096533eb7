//! Cohort-level evaluation: AUROC with exact tie handling, ROC curves,
//! percentile-bootstrap CIs over slides, Youden thresholds and the
//! per-cohort report table.

mod report;
mod roc;
mod threshold;

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{Error, Result};
use crate::labels::BinaryLabel;
use crate::scalar::Scalar;

pub use report::{
    format_cell, read_report_csv, write_report_csv, write_roc_points, ReportRow, ReportTable,
    MISSING_CELL, REPORT_HEADER, ROC_POINTS_HEADER,
};
pub use roc::{auroc, auroc_ci, trapezoid, evaluate_cohort, roc_curve, significance_vs_random, AurocCi, RocResult};
pub use threshold::{select_threshold, youden_j, DecisionThreshold, ThresholdMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CohortEntry<T> {
    pub slide_id: String,
    pub score: T,
    pub label: BinaryLabel,
}

impl<T> CohortEntry<T> {
    pub fn new(slide_id: impl Into<String>, score: T, label: BinaryLabel) -> Self {
        CohortEntry {
            slide_id: slide_id.into(),
            score,
            label,
        }
    }
}

/// Scored, labelled slides of one cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CohortPredictions<T> {
    pub cohort_id: String,
    pub entries: Vec<CohortEntry<T>>,
}

impl<T: Scalar> CohortPredictions<T> {
    /// Checks that slide ids are unique and scores lie in `[0, 1]`.
    pub fn new(cohort_id: impl Into<String>, entries: Vec<CohortEntry<T>>) -> Result<Self> {
        let cohort = CohortPredictions {
            cohort_id: cohort_id.into(),
            entries,
        };
        cohort.validate()?;
        Ok(cohort)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.slide_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate slide_id {:?} in cohort {}",
                    e.slide_id, self.cohort_id
                )));
            }
            if !(e.score >= T::zero() && e.score <= T::one()) {
                return Err(Error::InvalidInput(format!(
                    "score {} of slide {} outside [0, 1]",
                    e.score, e.slide_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(positives, negatives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|e| e.label.is_positive()).count();
        (pos, self.entries.len() - pos)
    }

    pub(crate) fn require_both_classes(&self) -> Result<(usize, usize)> {
        let (positives, negatives) = self.class_counts();
        if positives == 0 || negatives == 0 {
            return Err(Error::AurocUndefined {
                positives,
                negatives,
            });
        }
        Ok((positives, negatives))
    }
}

pub const COHORT_HEADER: [&str; 3] = ["slide_id", "score", "label"];

/// Reads `slide_id,score,label` rows.
pub fn read_cohort_predictions<T: Scalar, R: Read>(
    input: R,
    name: &str,
    cohort_id: &str,
) -> Result<CohortPredictions<T>> {
    let mut reader = csvio::reader(input, name, &COHORT_HEADER)?;
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let score: T = csvio::parse(csvio::field(&record, 1, name, row)?, name, row)?;
        if !(score >= T::zero() && score <= T::one()) {
            return Err(csvio::record_error(name, row, format!("score {score} outside [0, 1]")));
        }
        entries.push(CohortEntry {
            slide_id: csvio::field(&record, 0, name, row)?.to_string(),
            score,
            label: csvio::parse(csvio::field(&record, 2, name, row)?, name, row)?,
        });
    }
    CohortPredictions::new(cohort_id, entries)
}

pub fn write_cohort_predictions<T: Scalar, W: Write>(out: W, cohort: &CohortPredictions<T>) -> Result<()> {
    let mut w = csvio::writer(out);
    w.write_record(COHORT_HEADER)?;
    for e in &cohort.entries {
        w.write_record([e.slide_id.clone(), e.score.to_string(), e.label.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(".", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_ids_rejected() {
        let e = vec![
            CohortEntry::new("a", 0.1, BinaryLabel::Nevus),
            CohortEntry::new("a", 0.2, BinaryLabel::Melanoma),
        ];
        assert!(CohortPredictions::new("c", e).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let cohort = CohortPredictions::new(
            "c",
            vec![
                CohortEntry::new("s1", 0.125, BinaryLabel::Melanoma),
                CohortEntry::new("s2", 0.1 + 0.2, BinaryLabel::Nevus),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_cohort_predictions(&mut buf, &cohort).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("slide_id,score,label\n"));
        let back = read_cohort_predictions::<f64, _>(&buf[..], "mem", "c").unwrap();
        assert_eq!(back, cohort);
    }

    #[test]
    fn bad_label_names_row() {
        let text = "slide_id,score,label\na,0.5,melanoma\nb,0.5,benign\n";
        let err = read_cohort_predictions::<f64, _>(text.as_bytes(), "in.csv", "c").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }
}
