//! Experiment orchestration behind the `stackgcn` command line: repeated
//! seeded runs, classifier ablations, depth sweeps and bound reports.

pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{AggregationChoice, DatasetConfig, ExperimentConfig, GcnSettings, Method};
use pipeline::{run_seed, stacked_features, PredictionCache, Prepared, SeedOutcome, TrainedModel};

use crate::bounds::{bound_from_model, BoundReport};
use crate::data::{export_embeddings, write_bundle, DatasetBundle, ManifestEntry, EDGES_FILE, NODES_FILE, SPLITS_FILE};
use crate::error::{Error, Result};
use crate::gcn::{Checkpoint, FeatureInput};
use crate::learners::ClassifierKind;
use crate::stats::{paired_t_test, summarize, MethodSummary, RunResult, TTest};

pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub source_edge_rows: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl DatasetSummary {
    pub fn of(b: &DatasetBundle) -> Self {
        Self {
            name: b.name.clone(),
            num_nodes: b.graph.num_nodes(),
            num_edges: b.graph.edges().len(),
            source_edge_rows: b.source_edge_rows,
            feature_dim: b.graph.feature_dim(),
            num_classes: b.graph.num_classes(),
            train: b.splits.train.len(),
            val: b.splits.val.len(),
            test: b.splits.test.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub method_a: String,
    pub method_b: String,
    pub metric: String,
    pub test: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunResult>,
    pub summaries: Vec<MethodSummary>,
    pub paired_tests: Vec<PairedComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generalization_bound: Option<BoundReport>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method.as_str())
    }
}

/// Runs `seeds` in parallel on at most `jobs` threads, preserving order.
fn run_seeds<F>(jobs: usize, seeds: &[u64], f: F) -> Result<Vec<(u64, Result<SeedOutcome>)>>
where
    F: Fn(usize, u64) -> Result<SeedOutcome> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| seeds.par_iter().enumerate().map(|(i, &s)| (s, f(i, s))).collect()))
}

struct Collected {
    runs: Vec<RunResult>,
    failures: Vec<RunFailure>,
    first_models: Vec<TrainedModel>,
}

fn collect(outcomes: Vec<(u64, Result<SeedOutcome>)>) -> Collected {
    let mut c = Collected {
        runs: Vec::new(),
        failures: Vec::new(),
        first_models: Vec::new(),
    };
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                c.runs.extend(o.results);
                if c.first_models.is_empty() {
                    c.first_models = o.trained;
                }
            }
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                c.failures.push(RunFailure {
                    seed,
                    error: e.to_string(),
                })
            }
        }
    }
    c
}

fn summaries_for(config: &ExperimentConfig, methods: &[Method], runs: &[RunResult]) -> Result<Vec<MethodSummary>> {
    methods
        .iter()
        .filter_map(|m| {
            let mine: Vec<RunResult> = runs.iter().filter(|r| r.method == m.as_str()).cloned().collect();
            (!mine.is_empty()).then(|| {
                summarize(
                    m.as_str(),
                    &mine,
                    config.bootstrap.n_resamples,
                    config.bootstrap.level,
                    config.seed,
                )
            })
        })
        .collect()
}

fn paired_tests(methods: &[Method], runs: &[RunResult]) -> Vec<PairedComparison> {
    let series = |m: Method| -> Vec<(u64, f64)> {
        runs.iter()
            .filter(|r| r.method == m.as_str())
            .map(|r| (r.seed, r.accuracy))
            .collect()
    };
    let mut out = Vec::new();
    if !methods.contains(&Method::StackGcn) {
        return out;
    }
    let ours = series(Method::StackGcn);
    for other in [Method::GcnRaw, Method::StackOnly] {
        if !methods.contains(&other) {
            continue;
        }
        let theirs = series(other);
        let (a, b): (Vec<f64>, Vec<f64>) = ours
            .iter()
            .filter_map(|(s, x)| theirs.iter().find(|(t, _)| t == s).map(|(_, y)| (*x, *y)))
            .unzip();
        if let Ok(test) = paired_t_test(&a, &b) {
            out.push(PairedComparison {
                method_a: Method::StackGcn.to_string(),
                method_b: other.to_string(),
                metric: "accuracy".into(),
                test,
            });
        }
    }
    out
}

/// Runs the configured methods over every seed without touching disk.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<TrainedModel>)> {
    config.validate()?;
    let prep = Prepared::new(config.dataset.resolve()?);
    run_prepared(config, &prep, &config.classifiers, &config.methods)
}

fn run_prepared(
    config: &ExperimentConfig,
    prep: &Prepared,
    classifiers: &[ClassifierKind],
    methods: &[Method],
) -> Result<(ExperimentReport, Vec<TrainedModel>)> {
    let seeds = config.seeds();
    let stacked = methods
        .iter()
        .any(|m| matches!(m, Method::StackGcn | Method::StackOnly));
    let cache = if stacked {
        PredictionCache::build(prep, classifiers)?
    } else {
        PredictionCache::empty(classifiers.len())
    };
    let outcomes = run_seeds(config.jobs, &seeds, |i, s| {
        run_seed(prep, config, classifiers, &cache, methods, s, i == 0)
    })?;
    let Collected {
        runs,
        failures,
        first_models,
    } = collect(outcomes);

    let bound_model = first_models
        .iter()
        .find(|t| t.method == Method::StackGcn)
        .or_else(|| first_models.iter().find(|t| t.method == Method::GcnRaw))
        .filter(|t| t.model.num_layers() == 2);
    let generalization_bound = bound_model
        .map(|t| {
            let x = match &t.aggregated {
                Some(a) => a.view(),
                None => prep.bundle.graph.features(),
            };
            bound_from_model(
                &t.model,
                &prep.bundle,
                &prep.adj,
                x,
                config.bound.alpha_loss,
                config.bound.delta,
            )
        })
        .transpose()?;

    let mut resolved = config.clone();
    resolved.classifiers = classifiers.to_vec();
    resolved.methods = methods.to_vec();
    let report = ExperimentReport {
        summaries: summaries_for(config, methods, &runs)?,
        paired_tests: paired_tests(methods, &runs),
        config: resolved,
        dataset: DatasetSummary::of(&prep.bundle),
        seeds,
        runs,
        generalization_bound,
        failures,
    };
    Ok((report, first_models))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}

fn write_summary_csv(path: &Path, dataset: &str, rows: &[(String, &MethodSummary)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "dataset",
        "n_runs",
        "accuracy_mean",
        "accuracy_ci_half_width",
        "macro_f1_mean",
        "macro_f1_ci_half_width",
        "mean_train_seconds",
    ])?;
    for (label, s) in rows {
        w.write_record([
            label.clone(),
            dataset.to_string(),
            s.n_runs.to_string(),
            format!("{:.6}", s.accuracy.mean),
            format!("{:.6}", s.accuracy.half_width),
            format!("{:.6}", s.macro_f1.mean),
            format!("{:.6}", s.macro_f1.half_width),
            format!("{:.6}", s.mean_train_seconds),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `run`: the full pipeline and requested baselines, written to
/// `out_dir/report.json` and `out_dir/summary.csv`.
pub fn cmd_run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let (report, models) = run_experiment(config)?;
    let out = &config.out_dir;
    create_dir(out)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let rows: Vec<(String, &MethodSummary)> = report.summaries.iter().map(|s| (s.method.clone(), s)).collect();
    write_summary_csv(&out.join(SUMMARY_FILE), &report.dataset.name, &rows)?;
    if config.save_checkpoints {
        for t in &models {
            let path = out.join(format!("checkpoint_{}_seed{}.json", t.method, config.seed));
            Checkpoint::from_model(&t.model, t.input).save(path)?;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub classifiers: Vec<String>,
    pub summary: MethodSummary,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
    pub failures: Vec<RunFailure>,
}

/// Resolves registry names against the configured classifiers: a name
/// matching a configured kind reuses its hyperparameters.
pub fn resolve_combo(config: &ExperimentConfig, names: &[String]) -> Result<Vec<ClassifierKind>> {
    if names.is_empty() {
        return Err(Error::Config("empty classifier combination".into()));
    }
    names
        .iter()
        .map(|n| {
            let default = ClassifierKind::from_name(n)?;
            Ok(config
                .classifiers
                .iter()
                .find(|k| k.name() == default.name())
                .cloned()
                .unwrap_or(default))
        })
        .collect()
}

fn ablation_report(config: &ExperimentConfig, combos: &[Vec<String>]) -> Result<AblationReport> {
    config.validate()?;
    let kinds: Vec<Vec<ClassifierKind>> = combos.iter().map(|c| resolve_combo(config, c)).collect::<Result<_>>()?;
    let prep = Prepared::new(config.dataset.resolve()?);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (names, kinds) in combos.iter().zip(&kinds) {
        let (report, _) = run_prepared(config, &prep, kinds, &[Method::StackGcn])?;
        failures.extend(report.failures);
        if let Some(summary) = report.summaries.into_iter().next() {
            rows.push(AblationRow {
                classifiers: names.clone(),
                summary,
                runs: report.runs,
            });
        }
    }
    Ok(AblationReport {
        config: config.clone(),
        dataset: DatasetSummary::of(&prep.bundle),
        seeds: config.seeds(),
        rows,
        failures,
    })
}

/// `ablate`: one stacked-GCN block per classifier combination.
pub fn cmd_ablate(config: &ExperimentConfig, combos: &[Vec<String>]) -> Result<AblationReport> {
    let report = ablation_report(config, combos)?;
    let out = &config.out_dir;
    create_dir(out)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let rows: Vec<(String, &MethodSummary)> = report
        .rows
        .iter()
        .map(|r| (r.classifiers.join("+"), &r.summary))
        .collect();
    write_summary_csv(&out.join(SUMMARY_FILE), &report.dataset.name, &rows)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub depth: usize,
    pub summary: MethodSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthDrop {
    pub method: String,
    pub from_depth: usize,
    pub to_depth: usize,
    /// Mean accuracy at `from_depth` minus mean accuracy at `to_depth`.
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSweepReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub seeds: Vec<u64>,
    pub depths: Vec<usize>,
    pub rows: Vec<DepthRow>,
    pub drops: Vec<DepthDrop>,
    pub failures: Vec<RunFailure>,
}

impl DepthSweepReport {
    pub fn drop_for(&self, method: Method) -> Option<f64> {
        self.drops.iter().find(|d| d.method == method.as_str()).map(|d| d.drop)
    }

    pub fn accuracy(&self, method: Method, depth: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.depth == depth && r.summary.method == method.as_str())
            .map(|r| r.summary.accuracy.mean)
    }
}

pub const MIN_SWEEP_DEPTH: usize = 2;
pub const MAX_SWEEP_DEPTH: usize = 10;

/// Runs both GCN pipelines at each depth. With `embeddings_dir`, writes the
/// first seed's output-layer logits per depth.
pub fn depth_sweep(
    config: &ExperimentConfig,
    depths: &[usize],
    embeddings_dir: Option<&Path>,
) -> Result<DepthSweepReport> {
    config.validate()?;
    if depths.is_empty() {
        return Err(Error::Config("no depths given".into()));
    }
    if let Some(d) = depths.iter().find(|d| !(MIN_SWEEP_DEPTH..=MAX_SWEEP_DEPTH).contains(d)) {
        return Err(Error::Config(format!(
            "depth {d} outside [{MIN_SWEEP_DEPTH}, {MAX_SWEEP_DEPTH}]"
        )));
    }
    let prep = Prepared::new(config.dataset.resolve()?);
    let methods = [Method::GcnRaw, Method::StackGcn];
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &depth in depths {
        let mut cfg = config.clone();
        cfg.gcn.layers = depth;
        let (report, models) = run_prepared(&cfg, &prep, &config.classifiers, &methods)?;
        failures.extend(report.failures);
        for s in report.summaries {
            rows.push(DepthRow { depth, summary: s });
        }
        if let Some(dir) = embeddings_dir {
            for t in &models {
                let file = match t.method {
                    Method::StackGcn => format!("embeddings_depth{depth}.csv"),
                    other => format!("embeddings_{other}_depth{depth}.csv"),
                };
                export_embeddings(t.logits.view(), dir.join(file))?;
            }
        }
    }
    let from = *depths.iter().min().expect("non-empty");
    let to = *depths.iter().max().expect("non-empty");
    let acc = |m: Method, d: usize| {
        rows.iter()
            .find(|r| r.depth == d && r.summary.method == m.as_str())
            .map(|r| r.summary.accuracy.mean)
    };
    let drops = methods
        .iter()
        .filter_map(|&m| {
            Some(DepthDrop {
                method: m.to_string(),
                from_depth: from,
                to_depth: to,
                drop: acc(m, from)? - acc(m, to)?,
            })
        })
        .collect();
    Ok(DepthSweepReport {
        config: config.clone(),
        dataset: DatasetSummary::of(&prep.bundle),
        seeds: config.seeds(),
        depths: depths.to_vec(),
        rows,
        drops,
        failures,
    })
}

/// `depth-sweep`: [`depth_sweep`] plus report, summary and embeddings.
pub fn cmd_depth_sweep(config: &ExperimentConfig, depths: &[usize]) -> Result<DepthSweepReport> {
    let out = &config.out_dir;
    create_dir(out)?;
    let report = depth_sweep(config, depths, Some(out))?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let rows: Vec<(String, &MethodSummary)> = report
        .rows
        .iter()
        .map(|r| (format!("{}@{}", r.summary.method, r.depth), &r.summary))
        .collect();
    write_summary_csv(&out.join(SUMMARY_FILE), &report.dataset.name, &rows)?;
    Ok(report)
}

/// Bound report for a saved two-layer checkpoint. Aggregated-input
/// checkpoints rebuild their input matrix from the configured classifiers
/// with the checkpoint's seed.
pub fn bound_report(config: &ExperimentConfig, checkpoint_path: &Path) -> Result<BoundReport> {
    let ck = Checkpoint::load(checkpoint_path)?;
    let model = ck.to_model()?;
    if model.num_layers() != 2 {
        return Err(Error::BoundScope(model.num_layers()));
    }
    let prep = Prepared::new(config.dataset.resolve()?);
    let alpha = config.bound.alpha_loss;
    let delta = config.bound.delta;
    match ck.input {
        FeatureInput::Raw => bound_from_model(
            &model,
            &prep.bundle,
            &prep.adj,
            prep.bundle.graph.features(),
            alpha,
            delta,
        ),
        FeatureInput::Aggregated => {
            let cache = PredictionCache::empty(config.classifiers.len());
            let (agg, _) = stacked_features(&prep, &config.classifiers, &cache, config, ck.seed)?;
            bound_from_model(&model, &prep.bundle, &prep.adj, agg.matrix.view(), alpha, delta)
        }
    }
}

/// `bound`: writes `out_dir/bound.json`.
pub fn cmd_bound(config: &ExperimentConfig, checkpoint_path: &Path) -> Result<BoundReport> {
    let report = bound_report(config, checkpoint_path)?;
    create_dir(&config.out_dir)?;
    write_json(
        &config.out_dir.join("bound.json"),
        &serde_json::json!({ "generalization_bound": &report }),
    )?;
    Ok(report)
}

/// `gen-synthetic`: writes the configured synthetic bundle plus a
/// one-entry manifest into `out_dir`. Returns the bundle directory.
pub fn cmd_gen_synthetic(config: &ExperimentConfig) -> Result<PathBuf> {
    let bundle = config.dataset.resolve()?;
    let out = &config.out_dir;
    let dir = out.join(&bundle.name);
    write_bundle(&bundle, &dir)?;
    let entry = ManifestEntry {
        nodes: PathBuf::from(&bundle.name).join(NODES_FILE),
        edges: PathBuf::from(&bundle.name).join(EDGES_FILE),
        splits: PathBuf::from(&bundle.name).join(SPLITS_FILE),
    };
    let manifest = crate::data::Manifest {
        datasets: [(bundle.name.clone(), entry)].into_iter().collect(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let path = out.join(config::DEFAULT_MANIFEST);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(dir)
}

/// Drops every object key containing `seconds`, for comparing reports
/// across invocations.
pub fn strip_timings(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.retain(|k, _| !k.contains("seconds"));
            map.values_mut().for_each(strip_timings);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}
