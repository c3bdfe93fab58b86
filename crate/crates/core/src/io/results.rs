//! JSON documents produced per query and per evaluation run.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::container::write_bytes;
use super::manifest::PoseRecord;
use super::FormatError;
use crate::eval::{format_table, CategorySummary, EvalRecord};
use crate::matching::{MatchSet, Metric};
use crate::refinement::RefinementResult;

/// Output of matching one query against every reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub query_id: String,
    pub best_view: usize,
    pub best_view_id: String,
    pub metric: Metric,
    pub k: usize,
    /// Pose of the best reference view.
    pub coarse_pose: PoseRecord,
    pub matches: MatchSet,
}

/// Output of refining one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: String,
    pub category: String,
    pub best_view: usize,
    pub n_correspondences: usize,
    pub pose: PoseRecord,
    /// Depth-based scale factor when query depth is available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub refinement: RefinementResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub thresholds_deg: Vec<f64>,
    /// Per category in name order, pooled last.
    pub summaries: Vec<CategorySummary>,
    pub records: Vec<EvalRecord>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let bytes = std::fs::read(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_slice(&bytes).map_err(|e| FormatError::Json { path: path.to_path_buf(), message: e.to_string() })
}

/// Writes the report as JSON at `path` and the aligned table next to it with
/// a `.txt` extension.
pub fn write_results(path: &Path, report: &SummaryReport) -> Result<(), FormatError> {
    write_json(path, report)?;
    write_bytes(&path.with_extension("txt"), format_table(&report.summaries).as_bytes())
}
