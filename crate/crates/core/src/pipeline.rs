//! Per-query stages over a dataset manifest: choose the best reference view
//! and its matches, lift them to 3D and refine, then evaluate.

use std::path::{Path, PathBuf};

use nalgebra::Vector2;

use crate::eval::{summarize_by_category, EvalError, EvalRecord};
use crate::geometry::{unproject, GeometryError, RigidPose};
use crate::io::manifest::{DatasetManifest, PoseRecord};
use crate::io::results::{read_json, MatchRecord, QueryResult, SummaryReport};
use crate::io::{read_depth_map, read_feature_map, FormatError, ManifestError};
use crate::matching::{best_view, FeatureMap, MatchError, MatchSet, Metric};
use crate::refinement::{recover_scale, refine_pose, Correspondence2D3D, DepthSample, OptimizerConfig, RefineError};
use crate::refinement::RefinementProblem;
use crate::synth::DepthMap;

pub const MATCHES_DIR: &str = "matches";
pub const RESULTS_DIR: &str = "results";
pub const EVAL_DIR: &str = "eval";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("unknown query id \"{0}\"")]
    UnknownQuery(String),
    #[error("match file for {query_id} is inconsistent with the manifest: {message}")]
    StaleMatches { query_id: String, message: String },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub fn match_path(out: &Path, query_id: &str) -> PathBuf {
    out.join(MATCHES_DIR).join(format!("{query_id}.json"))
}

pub fn result_path(out: &Path, query_id: &str) -> PathBuf {
    out.join(RESULTS_DIR).join(format!("{query_id}.json"))
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.join(EVAL_DIR).join(SUMMARY_FILE)
}

/// Reference feature and depth maps, loaded once per run.
pub struct ReferenceSet {
    pub features: Vec<FeatureMap>,
    pub depths: Vec<DepthMap>,
}

impl ReferenceSet {
    pub fn load(manifest: &DatasetManifest) -> Result<Self, FormatError> {
        let mut features = Vec::with_capacity(manifest.references.len());
        let mut depths = Vec::with_capacity(manifest.references.len());
        for r in &manifest.references {
            features.push(read_feature_map(&manifest.resolve(&r.features))?);
            depths.push(read_depth_map(&manifest.resolve(&r.depth))?);
        }
        Ok(Self { features, depths })
    }
}

fn query_index(manifest: &DatasetManifest, query_id: &str) -> Result<usize, PipelineError> {
    manifest.query(query_id).map(|(i, _)| i).ok_or_else(|| PipelineError::UnknownQuery(query_id.to_string()))
}

pub fn match_query(
    manifest: &DatasetManifest,
    refs: &ReferenceSet,
    query_id: &str,
    k: usize,
    metric: Metric,
) -> Result<MatchRecord, PipelineError> {
    let q = &manifest.queries[query_index(manifest, query_id)?];
    let f_q = read_feature_map(&manifest.resolve(&q.features))?;
    let (best, matches) = best_view(&f_q, &refs.features, k, metric)?;
    Ok(MatchRecord {
        query_id: q.id.clone(),
        best_view: best,
        best_view_id: manifest.references[best].id.clone(),
        metric,
        k,
        coarse_pose: manifest.references[best].pose,
        matches,
    })
}

/// Lifts each matched reference pixel to a world point using the reference
/// depth map. Matches landing on zero depth are dropped.
pub fn lift_matches(
    matches: &MatchSet,
    depth: &DepthMap,
    manifest: &DatasetManifest,
    ref_pose: &RigidPose,
) -> Result<Vec<Correspondence2D3D>, GeometryError> {
    let mut out = Vec::with_capacity(matches.matches.len());
    for m in &matches.matches {
        let Some(d) = depth.sample_nearest(&m.ref_px).filter(|d| *d > 0.0) else { continue };
        let ref_world = unproject(&m.ref_px, f64::from(d), &manifest.intrinsics, ref_pose)?;
        out.push(Correspondence2D3D { query_px: m.query_px, ref_world });
    }
    Ok(out)
}

pub fn refine_query(
    manifest: &DatasetManifest,
    refs: &ReferenceSet,
    record: &MatchRecord,
    cfg: &OptimizerConfig,
) -> Result<QueryResult, PipelineError> {
    let stale = |message: String| PipelineError::StaleMatches { query_id: record.query_id.clone(), message };
    let q = &manifest.queries[query_index(manifest, &record.query_id)?];
    if record.best_view >= manifest.references.len() || manifest.references[record.best_view].id != record.best_view_id {
        return Err(stale(format!("reference {} ({}) not found", record.best_view, record.best_view_id)));
    }
    let ref_pose = manifest.reference_pose(record.best_view);
    if record.coarse_pose != PoseRecord::from(&ref_pose) {
        return Err(stale("coarse pose differs from the reference pose".into()));
    }
    let correspondences = lift_matches(&record.matches, &refs.depths[record.best_view], manifest, &ref_pose)?;
    let n_correspondences = correspondences.len();
    let problem = RefinementProblem { intrinsics_q: manifest.intrinsics, correspondences, initial_pose: ref_pose };
    let refinement = refine_pose(&problem, cfg)?;

    let scale = match &q.depth {
        Some(rel) => {
            let depth = read_depth_map(&manifest.resolve(rel))?;
            let samples = depth_samples(&problem, &depth);
            recover_scale(&refinement, &samples, &problem).ok()
        }
        None => None,
    };
    Ok(QueryResult {
        query_id: q.id.clone(),
        category: q.category.clone(),
        best_view: record.best_view,
        n_correspondences,
        pose: PoseRecord::from(&refinement.pose),
        scale,
        refinement,
    })
}

/// Measured query depth at every correspondence pixel that hits the object.
pub fn depth_samples(problem: &RefinementProblem, depth: &DepthMap) -> Vec<DepthSample> {
    problem
        .correspondences
        .iter()
        .filter_map(|c| {
            let d = depth.sample_nearest(&c.query_px).filter(|d| *d > 0.0)?;
            let pixel = Vector2::new(c.query_px.x.round(), c.query_px.y.round());
            Some(DepthSample { pixel, depth: f64::from(d) })
        })
        .collect()
}

pub fn eval_record(manifest: &DatasetManifest, result: &QueryResult) -> Result<EvalRecord, PipelineError> {
    let q = &manifest.queries[query_index(manifest, &result.query_id)?];
    let gt = q.pose.to_pose()?;
    Ok(EvalRecord::new(
        &q.id,
        &q.category,
        result.refinement.pose.rotation,
        gt.rotation,
        result.best_view,
        result.refinement.iterations_run,
    ))
}

/// Evaluates the result file of every manifest query found under `out`.
pub fn evaluate_results(
    manifest: &DatasetManifest,
    out: &Path,
    thresholds: &[f64],
) -> Result<SummaryReport, PipelineError> {
    let mut records = Vec::with_capacity(manifest.queries.len());
    for q in &manifest.queries {
        let result: QueryResult = read_json(&result_path(out, &q.id))?;
        if result.query_id != q.id {
            return Err(PipelineError::StaleMatches {
                query_id: q.id.clone(),
                message: format!("result file names query \"{}\"", result.query_id),
            });
        }
        records.push(eval_record(manifest, &result)?);
    }
    let summaries = summarize_by_category(&records, thresholds)?;
    Ok(SummaryReport { thresholds_deg: thresholds.to_vec(), summaries, records })
}
