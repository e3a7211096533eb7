use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::roc::RocResult;
use crate::csvio;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::Interval;

pub const REPORT_HEADER: [&str; 9] = [
    "model_id", "cohort_id", "auroc", "ci_low", "ci_high", "n", "n_boot", "seed", "significant",
];

pub const ROC_POINTS_HEADER: [&str; 4] = ["model_id", "cohort_id", "fpr", "tpr"];

/// Cell text for a model/cohort pair with no result.
pub const MISSING_CELL: &str = "n/a";

/// `"0.96 [0.94;0.99]"`.
pub fn format_cell<T: Scalar>(auroc: T, ci: &Interval<T>) -> String {
    format!(
        "{:.2} [{:.2};{:.2}]",
        auroc.to_f64_lossy(),
        ci.low.to_f64_lossy(),
        ci.high.to_f64_lossy()
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ReportRow<T> {
    pub model_id: String,
    pub cohort_id: String,
    pub auroc: T,
    pub ci: Interval<T>,
    pub n: usize,
    pub n_boot: usize,
    pub seed: u64,
    pub significant: bool,
}

impl<T: Scalar> ReportRow<T> {
    pub fn from_result(model_id: &str, result: &RocResult<T>) -> Self {
        ReportRow {
            model_id: model_id.to_string(),
            cohort_id: result.cohort_id.clone(),
            auroc: result.auroc,
            ci: result.ci,
            n: result.n,
            n_boot: result.n_boot,
            seed: result.seed,
            significant: result.significant(),
        }
    }

    pub fn cell(&self) -> String {
        format_cell(self.auroc, &self.ci)
    }
}

/// Models as rows, cohorts as columns.
#[derive(Debug, Clone, Default)]
pub struct ReportTable<T> {
    /// `(model_id, display label)` in row order.
    models: Vec<(String, String)>,
    cohorts: Vec<String>,
    cells: BTreeMap<(String, String), ReportRow<T>>,
}

impl<T: Scalar> ReportTable<T> {
    pub fn new() -> Self {
        ReportTable {
            models: Vec::new(),
            cohorts: Vec::new(),
            cells: BTreeMap::new(),
        }
    }

    pub fn add_model(&mut self, model_id: &str, label: &str) {
        if !self.models.iter().any(|(id, _)| id == model_id) {
            self.models.push((model_id.to_string(), label.to_string()));
        }
    }

    pub fn add_cohort(&mut self, cohort_id: &str) {
        if !self.cohorts.iter().any(|c| c == cohort_id) {
            self.cohorts.push(cohort_id.to_string());
        }
    }

    /// Inserts a cell, registering unseen models and cohorts.
    pub fn insert(&mut self, row: ReportRow<T>) {
        let id = row.model_id.clone();
        self.add_model(&id, &id);
        self.add_cohort(&row.cohort_id);
        self.cells.insert((row.model_id.clone(), row.cohort_id.clone()), row);
    }

    pub fn get(&self, model_id: &str, cohort_id: &str) -> Option<&ReportRow<T>> {
        self.cells.get(&(model_id.to_string(), cohort_id.to_string()))
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.models.iter().map(|(id, _)| id.as_str())
    }

    pub fn cohort_ids(&self) -> impl Iterator<Item = &str> {
        self.cohorts.iter().map(String::as_str)
    }

    /// Rows in table order: models, then cohorts.
    pub fn rows(&self) -> Vec<&ReportRow<T>> {
        self.models
            .iter()
            .flat_map(|(m, _)| self.cohorts.iter().filter_map(move |c| self.get(m, c)))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut grid: Vec<Vec<String>> = Vec::with_capacity(self.models.len() + 1);
        let mut header = vec!["Model".to_string()];
        header.extend(self.cohorts.iter().cloned());
        grid.push(header);
        for (id, label) in &self.models {
            let mut line = vec![label.clone()];
            for c in &self.cohorts {
                line.push(self.get(id, c).map_or_else(|| MISSING_CELL.to_string(), |r| r.cell()));
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|col| grid.iter().map(|l| l[col].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, line) in grid.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(rule));
                out.push('\n');
            }
        }
        out
    }
}

pub fn write_report_csv<T: Scalar, W: Write>(out: W, rows: &[&ReportRow<T>]) -> Result<()> {
    let mut w = csvio::writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.model_id.clone(),
            r.cohort_id.clone(),
            r.auroc.to_string(),
            r.ci.low.to_string(),
            r.ci.high.to_string(),
            r.n.to_string(),
            r.n_boot.to_string(),
            r.seed.to_string(),
            r.significant.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(".", e))?;
    Ok(())
}

pub fn read_report_csv<T: Scalar, R: Read>(input: R, name: &str) -> Result<Vec<ReportRow<T>>> {
    let mut reader = csvio::reader(input, name, &REPORT_HEADER)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let f = |k: usize| csvio::field(&record, k, name, row);
        rows.push(ReportRow {
            model_id: f(0)?.to_string(),
            cohort_id: f(1)?.to_string(),
            auroc: csvio::parse(f(2)?, name, row)?,
            ci: Interval::new(csvio::parse(f(3)?, name, row)?, csvio::parse(f(4)?, name, row)?),
            n: csvio::parse(f(5)?, name, row)?,
            n_boot: csvio::parse(f(6)?, name, row)?,
            seed: csvio::parse(f(7)?, name, row)?,
            significant: csvio::parse(f(8)?, name, row)?,
        });
    }
    Ok(rows)
}

pub fn write_roc_points<T: Scalar, W: Write>(out: W, curves: &[(&str, &RocResult<T>)]) -> Result<()> {
    let mut w = csvio::writer(out);
    w.write_record(ROC_POINTS_HEADER)?;
    for (model_id, result) in curves {
        for (fpr, tpr) in &result.curve {
            w.write_record([
                model_id.to_string(),
                result.cohort_id.clone(),
                fpr.to_string(),
                tpr.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(".", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, cohort: &str, auroc: f64) -> ReportRow<f64> {
        ReportRow {
            model_id: model.into(),
            cohort_id: cohort.into(),
            auroc,
            ci: Interval::new(auroc - 0.1, (auroc + 0.1).min(1.0)),
            n: 40,
            n_boot: 100,
            seed: 7,
            significant: auroc - 0.1 > 0.5,
        }
    }

    #[test]
    fn cell_format() {
        assert_eq!(format_cell(0.956, &Interval::new(0.944, 0.988)), "0.96 [0.94;0.99]");
        assert!(format_cell(0.5, &Interval::new(0.4, 0.6)).starts_with("0.50 ["));
        assert_eq!(format_cell(0.75f32, &Interval::new(0.64, 0.86)), "0.75 [0.64;0.86]");
    }

    #[test]
    fn missing_cells() {
        let mut t = ReportTable::new();
        t.add_model("he", "H&E");
        t.add_model("ma", "MelanA");
        t.add_cohort("A");
        t.add_cohort("B");
        t.insert(row("he", "A", 0.9));
        t.insert(row("he", "B", 0.8));
        t.insert(row("ma", "A", 0.7));
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("H&E"));
        assert!(lines[3].ends_with(MISSING_CELL));
        assert_eq!(t.rows().len(), 3);
    }

    #[test]
    fn csv_round_trip() {
        let rows = [row("he", "A", 0.91), row("ma", "B", 1.0 / 3.0)];
        let refs: Vec<&ReportRow<f64>> = rows.iter().collect();
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &refs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("model_id,cohort_id,auroc,ci_low,ci_high,n,n_boot,seed,significant\n"));
        assert_eq!(read_report_csv::<f64, _>(&buf[..], "mem").unwrap(), rows.to_vec());
    }
}
