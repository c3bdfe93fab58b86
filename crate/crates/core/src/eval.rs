//! Rotation-error evaluation: per-query geodesic error, median error, and the
//! fraction of queries below each angular threshold.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::geodesic_distance;

pub const DEFAULT_THRESHOLDS: [f64; 2] = [15.0, 30.0];
pub const POOLED_CATEGORY: &str = "all";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no records to summarize")]
    Empty,
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("record {index} has error {value}, outside [0, 180] degrees")]
    InvalidError { index: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    pub category: String,
    pub estimated_rotation: Matrix3<f64>,
    pub gt_rotation: Matrix3<f64>,
    pub error_deg: f64,
    pub best_view: usize,
    pub iterations_run: usize,
}

impl EvalRecord {
    pub fn new(
        query_id: impl Into<String>,
        category: impl Into<String>,
        estimated_rotation: Matrix3<f64>,
        gt_rotation: Matrix3<f64>,
        best_view: usize,
        iterations_run: usize,
    ) -> Self {
        let error_deg = geodesic_distance(&estimated_rotation, &gt_rotation).to_degrees().clamp(0.0, 180.0);
        Self {
            query_id: query_id.into(),
            category: category.into(),
            estimated_rotation,
            gt_rotation,
            error_deg,
            best_view,
            iterations_run,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAccuracy {
    pub threshold_deg: f64,
    /// Fraction of records with error strictly below the threshold.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub median_err_deg: f64,
    /// In ascending threshold order.
    pub acc_at: Vec<ThresholdAccuracy>,
    pub n: usize,
}

impl EvalSummary {
    pub fn acc(&self, threshold_deg: f64) -> Option<f64> {
        self.acc_at.iter().find(|a| a.threshold_deg == threshold_deg).map(|a| a.fraction)
    }
}

/// Summary for one category, or for all records pooled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: String,
    pub summary: EvalSummary,
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<(), EvalError> {
    if let Some(t) = thresholds.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(EvalError::InvalidThresholds(format!("{t} is not a finite non-negative angle")));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidThresholds(format!("{thresholds:?} is not strictly ascending")));
    }
    Ok(())
}

pub fn summarize_errors(errors: &[f64], thresholds: &[f64]) -> Result<EvalSummary, EvalError> {
    if errors.is_empty() {
        return Err(EvalError::Empty);
    }
    validate_thresholds(thresholds)?;
    if let Some(index) = errors.iter().position(|e| !(0.0..=180.0).contains(e)) {
        return Err(EvalError::InvalidError { index, value: errors[index] });
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median_err_deg = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    let acc_at = thresholds
        .iter()
        .map(|&t| ThresholdAccuracy {
            threshold_deg: t,
            fraction: sorted.partition_point(|&e| e < t) as f64 / n as f64,
        })
        .collect();
    Ok(EvalSummary { median_err_deg, acc_at, n })
}

pub fn summarize(records: &[EvalRecord], thresholds: &[f64]) -> Result<EvalSummary, EvalError> {
    let errors: Vec<f64> = records.iter().map(|r| r.error_deg).collect();
    summarize_errors(&errors, thresholds)
}

/// One summary per category in name order, followed by the pooled summary.
/// A single category already named like the pooled row yields just that row.
pub fn summarize_by_category(records: &[EvalRecord], thresholds: &[f64]) -> Result<Vec<CategorySummary>, EvalError> {
    let pooled = summarize(records, thresholds)?;
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.category).or_default().push(r.error_deg);
    }
    // Records already labelled with the pooled name would only repeat the pooled row.
    if groups.len() == 1 && groups.contains_key(POOLED_CATEGORY) {
        return Ok(vec![CategorySummary { category: POOLED_CATEGORY.into(), summary: pooled }]);
    }
    let mut out = Vec::with_capacity(groups.len() + 1);
    for (category, errors) in groups {
        out.push(CategorySummary { category: category.to_string(), summary: summarize_errors(&errors, thresholds)? });
    }
    out.push(CategorySummary { category: POOLED_CATEGORY.into(), summary: pooled });
    Ok(out)
}

fn threshold_label(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("acc.{}", t as i64)
    } else {
        format!("acc.{t}")
    }
}

/// Aligned text table: median error in degrees, accuracies in percent.
pub fn format_table(rows: &[CategorySummary]) -> String {
    let thresholds: Vec<f64> =
        rows.first().map(|r| r.summary.acc_at.iter().map(|a| a.threshold_deg).collect()).unwrap_or_default();
    let mut header = vec!["category".to_string(), "n".into(), "med.err".into()];
    header.extend(thresholds.iter().map(|&t| threshold_label(t)));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.category.clone(), r.summary.n.to_string(), format!("{:.1}", r.summary.median_err_deg)];
            cells.extend(r.summary.acc_at.iter().map(|a| format!("{:.1}", a.fraction * 100.0)));
            cells
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| body.iter().map(|row| row.get(c).map_or(0, String::len)).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&body) {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
