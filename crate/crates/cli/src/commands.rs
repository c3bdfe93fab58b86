use std::path::Path;

use rayon::prelude::*;
use tracing::info;

use catpose_core::eval::{format_table, summarize_by_category, validate_thresholds, EvalRecord};
use catpose_core::io::results::{read_json, write_json, write_results, SummaryReport};
use catpose_core::io::{read_manifest, DatasetManifest};
use catpose_core::pipeline::{
    evaluate_results, match_path, match_query, refine_query, result_path, summary_path, ReferenceSet,
};
use catpose_core::synth::{make_dataset, DatasetConfig};
use catpose_core::OptimizerConfig;

use crate::args::{Cli, Command, EvalArgs, EvalOpts, MatchArgs, MatchOpts, PipelineArgs, RefineArgs, RefineOpts, SynthArgs};
use crate::error::CliError;

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => synth(a),
        Command::Match(a) => match_one(a),
        Command::Refine(a) => refine_one(a),
        Command::Eval(a) => eval(a),
        Command::Pipeline(a) => pipeline(a),
    })
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg: DatasetConfig = match &a.config {
        Some(path) => read_json(path).map_err(|e| CliError::Config(e.to_string()))?,
        None => DatasetConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(n) = a.refs {
        cfg.n_refs = n;
    }
    if let Some(n) = a.queries {
        cfg.n_queries = n;
    }
    if let Some(n) = a.noise {
        cfg.noise_sd = n;
    }
    if let Some(g) = a.grid {
        cfg.grid_rows = g;
        cfg.grid_cols = g;
    }
    if let Some(d) = a.descriptor_dim {
        cfg.descriptor_dim = d;
    }
    if let Some(w) = a.max_warp {
        cfg.max_warp = w;
    }
    if let Some(c) = a.category {
        cfg.category = c;
    }
    let m = make_dataset(&cfg, &a.out)?;
    info!(out = %a.out.display(), references = m.references.len(), queries = m.queries.len(), "dataset written");
    Ok(())
}

fn load_manifest(path: &Path) -> Result<DatasetManifest, CliError> {
    if !path.is_file() {
        return Err(CliError::Config(format!("manifest {} does not exist", path.display())));
    }
    Ok(read_manifest(path)?)
}

fn check_k(opts: &MatchOpts) -> Result<(), CliError> {
    if opts.k < 1 {
        return Err(CliError::Config("--k must be at least 1".into()));
    }
    Ok(())
}

fn optimizer_config(opts: &RefineOpts) -> Result<OptimizerConfig, CliError> {
    let mut cfg: OptimizerConfig = match &opts.optimizer_config {
        Some(path) => read_json(path).map_err(|e| CliError::Config(e.to_string()))?,
        None => OptimizerConfig::default(),
    };
    if let Some(n) = opts.iters {
        cfg.max_iters = n;
    }
    if let Some(lr) = opts.lr {
        cfg.learning_rate = lr;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn check_thresholds(opts: &EvalOpts) -> Result<(), CliError> {
    validate_thresholds(&opts.thresholds).map_err(|e| CliError::Config(e.to_string()))
}

fn match_and_write(
    m: &DatasetManifest,
    refs: &ReferenceSet,
    query: &str,
    opts: &MatchOpts,
    out: &Path,
) -> Result<catpose_core::io::MatchRecord, CliError> {
    let record = match_query(m, refs, query, opts.k, opts.metric.into())?;
    write_json(&match_path(out, query), &record)?;
    info!(query, best_view = %record.best_view_id, cumulative = record.matches.cumulative_distance(), "matched");
    Ok(record)
}

fn refine_and_write(
    m: &DatasetManifest,
    refs: &ReferenceSet,
    record: &catpose_core::io::MatchRecord,
    cfg: &OptimizerConfig,
    out: &Path,
) -> Result<(), CliError> {
    let result = refine_query(m, refs, record, cfg)?;
    write_json(&result_path(out, &record.query_id), &result)?;
    info!(
        query = %record.query_id,
        correspondences = result.n_correspondences,
        iterations = result.refinement.iterations_run,
        loss = result.refinement.best_loss,
        "refined"
    );
    Ok(())
}

fn eval_and_write(m: &DatasetManifest, results: &Path, opts: &EvalOpts, out: &Path) -> Result<(), CliError> {
    let report = evaluate_results(m, results, &opts.thresholds)?;
    write_report(&report, out)
}

fn write_report(report: &SummaryReport, out: &Path) -> Result<(), CliError> {
    let path = summary_path(out);
    write_results(&path, report)?;
    print!("{}", format_table(&report.summaries));
    info!(summary = %path.display(), queries = report.records.len(), "evaluated");
    Ok(())
}

fn match_one(a: MatchArgs) -> Result<(), CliError> {
    check_k(&a.matching)?;
    let m = load_manifest(&a.manifest)?;
    let refs = ReferenceSet::load(&m)?;
    match_and_write(&m, &refs, &a.query, &a.matching, &a.out)?;
    Ok(())
}

fn refine_one(a: RefineArgs) -> Result<(), CliError> {
    let cfg = optimizer_config(&a.refine)?;
    let m = load_manifest(&a.manifest)?;
    if m.query(&a.query).is_none() {
        return Err(CliError::Pipeline(catpose_core::pipeline::PipelineError::UnknownQuery(a.query)));
    }
    let refs = ReferenceSet::load(&m)?;
    let record = read_json(&match_path(&a.out, &a.query))?;
    refine_and_write(&m, &refs, &record, &cfg, &a.out)
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    check_thresholds(&a.eval)?;
    if let Some(file) = a.results.as_deref().filter(|p| p.is_file()) {
        let records: Vec<EvalRecord> = read_json(file)?;
        let summaries = summarize_by_category(&records, &a.eval.thresholds)?;
        let report = SummaryReport { thresholds_deg: a.eval.thresholds.clone(), summaries, records };
        return write_report(&report, &a.out);
    }
    let manifest = a.manifest.as_deref().ok_or_else(|| {
        CliError::Config("--manifest is required unless --results names a records file".into())
    })?;
    let m = load_manifest(manifest)?;
    let results = a.results.as_deref().unwrap_or(&a.out);
    eval_and_write(&m, results, &a.eval, &a.out)
}

fn pipeline(a: PipelineArgs) -> Result<(), CliError> {
    check_k(&a.matching)?;
    let cfg = optimizer_config(&a.refine)?;
    check_thresholds(&a.eval)?;
    let m = load_manifest(&a.manifest)?;
    let refs = ReferenceSet::load(&m)?;
    let outcomes: Vec<Result<(), CliError>> = m
        .queries
        .par_iter()
        .map(|q| {
            let record = match_and_write(&m, &refs, &q.id, &a.matching, &a.out)?;
            refine_and_write(&m, &refs, &record, &cfg, &a.out)
        })
        .collect();
    // Report the first failure in manifest order, independent of scheduling.
    outcomes.into_iter().collect::<Result<Vec<()>, _>>()?;
    eval_and_write(&m, &a.out, &a.eval, &a.out)
}
