//! One seed of the stacking pipeline and its baselines.

use std::time::Instant;

use ndarray::Array2;

use super::config::{ExperimentConfig, Method};
use crate::aggregation::{aggregate, AggregatedFeatures};
use crate::data::DatasetBundle;
use crate::error::Result;
use crate::gcn::{argmax_rows, forward, train_on, FeatureInput, GcnModel};
use crate::graph::{normalize_adjacency, NormalizedAdjacency};
use crate::learners::{fit, ClassifierKind};
use crate::stats::{accuracy, macro_f1, RunResult};

/// A dataset with its normalized adjacency, shared by every run.
pub struct Prepared {
    pub bundle: DatasetBundle,
    pub adj: NormalizedAdjacency,
}

impl Prepared {
    pub fn new(bundle: DatasetBundle) -> Self {
        let adj = normalize_adjacency(&bundle.graph);
        Self { bundle, adj }
    }

    fn train_features(&self) -> Array2<f64> {
        let g = &self.bundle.graph;
        let x = g.features();
        Array2::from_shape_fn((self.bundle.splits.train.len(), g.feature_dim()), |(r, c)| {
            x[[self.bundle.splits.train[r], c]]
        })
    }

    fn train_labels(&self) -> Vec<usize> {
        let labels = self.bundle.graph.labels();
        self.bundle.splits.train.iter().map(|&i| labels[i]).collect()
    }
}

/// Predictions of one fitted base model over all nodes.
#[derive(Debug, Clone)]
pub struct BasePrediction {
    pub probabilities: Array2<f64>,
    pub fit_seconds: f64,
}

/// Fits `kind` on the training rows and predicts every node.
pub fn base_prediction(prep: &Prepared, kind: &ClassifierKind) -> Result<BasePrediction> {
    let start = Instant::now();
    let model = fit(
        kind,
        prep.train_features().view(),
        &prep.train_labels(),
        prep.bundle.graph.num_classes(),
    )?;
    let probabilities = model.predict(prep.bundle.graph.features())?;
    Ok(BasePrediction {
        probabilities,
        fit_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Base predictions that do not depend on the run seed, computed once.
pub struct PredictionCache {
    entries: Vec<Option<BasePrediction>>,
}

impl PredictionCache {
    pub fn build(prep: &Prepared, classifiers: &[ClassifierKind]) -> Result<Self> {
        let entries = classifiers
            .iter()
            .map(|k| (!k.is_seeded()).then(|| base_prediction(prep, k)).transpose())
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    /// Cache-less variant: every classifier fit per run.
    pub fn empty(len: usize) -> Self {
        Self {
            entries: vec![None; len],
        }
    }
}

/// Fits (or reuses) every base model for `seed` and aggregates them.
/// Returns the aggregated features and the wall-clock cost, where reused
/// models contribute their original fit time.
pub fn stacked_features(
    prep: &Prepared,
    classifiers: &[ClassifierKind],
    cache: &PredictionCache,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(AggregatedFeatures, f64)> {
    let mut seconds = 0.0;
    let mut preds = Vec::with_capacity(classifiers.len());
    for (kind, cached) in classifiers.iter().zip(&cache.entries) {
        let base = match cached {
            Some(b) => b.clone(),
            None => base_prediction(prep, &kind.reseeded(seed))?,
        };
        seconds += base.fit_seconds;
        preds.push(base.probabilities);
    }
    let start = Instant::now();
    let agg = aggregate(
        config.aggregation.with_seed(seed),
        &preds,
        prep.bundle.graph.labels(),
        &prep.bundle.splits.train,
    )?;
    seconds += start.elapsed().as_secs_f64();
    Ok((agg, seconds))
}

/// A trained GCN kept for bounds, checkpoints or embedding export.
pub struct TrainedModel {
    pub method: Method,
    pub model: GcnModel,
    pub input: FeatureInput,
    /// The aggregated matrix when `input` is aggregated.
    pub aggregated: Option<Array2<f64>>,
    pub logits: Array2<f64>,
}

pub struct SeedOutcome {
    pub results: Vec<RunResult>,
    pub trained: Vec<TrainedModel>,
}

fn score(prep: &Prepared, method: Method, seed: u64, pred: &[usize], seconds: f64) -> RunResult {
    let g = &prep.bundle.graph;
    let test = &prep.bundle.splits.test;
    RunResult {
        method: method.to_string(),
        seed,
        accuracy: accuracy(pred, g.labels(), test),
        macro_f1: macro_f1(pred, g.labels(), test, g.num_classes()),
        train_seconds: seconds,
    }
}

/// Runs every method in `methods` for one seed.
pub fn run_seed(
    prep: &Prepared,
    config: &ExperimentConfig,
    classifiers: &[ClassifierKind],
    cache: &PredictionCache,
    methods: &[Method],
    seed: u64,
    keep_models: bool,
) -> Result<SeedOutcome> {
    let g = &prep.bundle.graph;
    let k = g.num_classes();
    let mut results = Vec::new();
    let mut trained = Vec::new();

    let needs_stack = methods
        .iter()
        .any(|m| matches!(m, Method::StackGcn | Method::StackOnly));
    let stacked = if needs_stack {
        Some(stacked_features(prep, classifiers, cache, config, seed)?)
    } else {
        None
    };

    for &method in methods {
        match method {
            Method::StackOnly => {
                let (agg, secs) = stacked.as_ref().expect("stacked features computed");
                let pred = argmax_rows(agg.matrix.view());
                results.push(score(prep, method, seed, &pred, *secs));
            }
            Method::StackGcn => {
                let (agg, secs) = stacked.as_ref().expect("stacked features computed");
                let cfg = config.gcn.to_config(k, k, seed);
                let (model, trace) = train_on(&prep.adj, agg.matrix.view(), g.labels(), &prep.bundle.splits, cfg)?;
                let logits = forward(&model, &prep.adj, agg.matrix.view())?.logits;
                let pred = argmax_rows(logits.view());
                results.push(score(prep, method, seed, &pred, secs + trace.seconds));
                if keep_models {
                    trained.push(TrainedModel {
                        method,
                        model,
                        input: FeatureInput::Aggregated,
                        aggregated: Some(agg.matrix.clone()),
                        logits,
                    });
                }
            }
            Method::GcnRaw => {
                let cfg = config.gcn.to_config(g.feature_dim(), k, seed);
                let (model, trace) = train_on(&prep.adj, g.features(), g.labels(), &prep.bundle.splits, cfg)?;
                let logits = forward(&model, &prep.adj, g.features())?.logits;
                let pred = argmax_rows(logits.view());
                results.push(score(prep, method, seed, &pred, trace.seconds));
                if keep_models {
                    trained.push(TrainedModel {
                        method,
                        model,
                        input: FeatureInput::Raw,
                        aggregated: None,
                        logits,
                    });
                }
            }
        }
    }
    Ok(SeedOutcome { results, trained })
}
