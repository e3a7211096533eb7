//! Cohort evaluation of slide predictions and the report table.

use std::collections::BTreeMap;

use super::predict::{hierarchical_id, melana_fused_id, multistain_id};
use super::PipelineConfig;
use crate::aggregate::SlidePrediction;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_cohort, CohortEntry, CohortPredictions, ReportRow, ReportTable, RocResult};
use crate::tiling::Stain;
use crate::Real;

/// Report rows for the configured fusion mode: `(model_id, label)`.
pub fn report_rows(config: &PipelineConfig) -> Vec<(String, String)> {
    let mut rows = Vec::new();
    for stain in Stain::ALL {
        for s in config.scorers_for(stain) {
            let name = match stain {
                Stain::HE => "H&E",
                Stain::MelanA => "MelanA",
            };
            rows.push((s.model_id(), format!("{name} ({:?} µm/px)", s.magnification.um_per_px())));
        }
    }
    let mode = config.fusion.mode;
    let n_melana = config.scorers_for(Stain::MelanA).count();
    rows.push((melana_fused_id(mode), format!("MelanA (all {n_melana} combined)")));
    rows.push((multistain_id(mode), "MelanA + H&E".to_string()));
    rows.push((hierarchical_id(mode), "MelanA + H&E (hierarchical)".to_string()));
    rows
}

/// Evaluation results of one run.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Rows of the configured fusion mode, one column per cohort.
    pub table: ReportTable<Real>,
    /// Every model, including all fusion modes, keyed by `(model_id, cohort_id)`.
    pub results: BTreeMap<(String, String), RocResult<Real>>,
}

impl RunReport {
    pub fn result(&self, model_id: &str, cohort_id: &str) -> Option<&RocResult<Real>> {
        self.results.get(&(model_id.to_string(), cohort_id.to_string()))
    }

    pub fn auroc(&self, model_id: &str, cohort_id: &str) -> Option<Real> {
        self.result(model_id, cohort_id).map(|r| r.auroc)
    }

    /// Every result as a report row, in `(model_id, cohort_id)` order.
    pub fn all_rows(&self) -> Vec<ReportRow<Real>> {
        self.results
            .iter()
            .map(|((model, _), r)| ReportRow::from_result(model, r))
            .collect()
    }
}

/// Groups a cohort's slide predictions by model and evaluates each group.
pub fn evaluate_predictions(
    config: &PipelineConfig,
    cohort_id: &str,
    predictions: &[SlidePrediction<Real>],
) -> Result<Vec<(String, RocResult<Real>)>> {
    let mut by_model: BTreeMap<&str, Vec<CohortEntry<Real>>> = BTreeMap::new();
    for p in predictions {
        let label = p.label.ok_or_else(|| {
            Error::InvalidInput(format!("slide {} has no label; cannot evaluate", p.slide_id))
        })?;
        by_model
            .entry(p.model_id.as_str())
            .or_default()
            .push(CohortEntry::new(p.slide_id.clone(), p.score, label));
    }
    let bootstrap = config.cohort_bootstrap();
    by_model
        .into_iter()
        .map(|(model, entries)| {
            let cohort = CohortPredictions::new(cohort_id, entries)?;
            let result = evaluate_cohort(&cohort, &bootstrap).map_err(|e| Error::Stage {
                stage: "evaluate",
                slide_id: format!("{model} on {cohort_id}"),
                source: Box::new(e),
            })?;
            Ok((model.to_string(), result))
        })
        .collect()
}

/// Evaluates every cohort and assembles the report.
pub fn build_report(
    config: &PipelineConfig,
    cohorts: &[(String, Vec<SlidePrediction<Real>>)],
) -> Result<RunReport> {
    let mut table = ReportTable::new();
    let rows = report_rows(config);
    for (id, label) in &rows {
        table.add_model(id, label);
    }
    let mut results = BTreeMap::new();
    for (cohort_id, preds) in cohorts {
        table.add_cohort(cohort_id);
        for (model, result) in evaluate_predictions(config, cohort_id, preds)? {
            if rows.iter().any(|(id, _)| *id == model) {
                table.insert(ReportRow::from_result(&model, &result));
            }
            results.insert((model, cohort_id.clone()), result);
        }
    }
    Ok(RunReport { table, results })
}
