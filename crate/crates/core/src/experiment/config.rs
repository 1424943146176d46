use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationMethod;
use crate::bounds::{DEFAULT_ALPHA_LOSS, DEFAULT_DELTA};
use crate::data::{generate_synthetic, load_bundle_named, DatasetBundle, Manifest, SyntheticSpec};
use crate::error::{Error, Result};
use crate::gcn::{
    DecayScope, GcnConfig, DEFAULT_HIDDEN, DEFAULT_ITERATIONS, DEFAULT_LEARNING_RATE, DEFAULT_WEIGHT_DECAY,
};
use crate::learners::ClassifierKind;
use crate::stats::{DEFAULT_LEVEL, DEFAULT_RESAMPLES};

pub const DEFAULT_MANIFEST: &str = "datasets.toml";

/// Pipelines an experiment can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Base classifiers, aggregation, then a GCN on the aggregated matrix.
    #[serde(rename = "sstagcn")]
    StackGcn,
    /// GCN on the raw node features.
    #[serde(rename = "gcn-raw")]
    GcnRaw,
    /// Argmax of the aggregated matrix, no GCN.
    #[serde(rename = "stack-only")]
    StackOnly,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::StackGcn, Method::GcnRaw, Method::StackOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::StackGcn => "sstagcn",
            Method::GcnRaw => "gcn-raw",
            Method::StackOnly => "stack-only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (sstagcn, gcn-raw, stack-only)")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Config-level aggregation choice; the voting seed comes from the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationChoice {
    Mean,
    Attention,
    #[default]
    Voting,
    RoundedLabelMean,
}

impl AggregationChoice {
    pub fn with_seed(self, seed: u64) -> AggregationMethod {
        match self {
            Self::Mean => AggregationMethod::Mean,
            Self::Attention => AggregationMethod::Attention,
            Self::Voting => AggregationMethod::Voting { seed },
            Self::RoundedLabelMean => AggregationMethod::RoundedLabelMean,
        }
    }
}

/// Where the data comes from. Exactly one of `synthetic`, the three file
/// paths, or `name` (looked up in `manifest`) is used, in that order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splits: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

impl DatasetConfig {
    pub fn synthetic(spec: SyntheticSpec) -> Self {
        Self {
            synthetic: Some(spec),
            ..Self::default()
        }
    }

    pub fn resolve(&self) -> Result<DatasetBundle> {
        if let Some(spec) = &self.synthetic {
            return generate_synthetic(spec);
        }
        match (&self.nodes, &self.edges, &self.splits) {
            (Some(n), Some(e), Some(s)) => {
                let name = self.name.clone().unwrap_or_else(|| "dataset".into());
                return load_bundle_named(name, n, e, s);
            }
            (None, None, None) => {}
            _ => {
                return Err(Error::Config(
                    "dataset needs all of `nodes`, `edges` and `splits`".into(),
                ))
            }
        }
        let name = self
            .name
            .as_deref()
            .ok_or_else(|| Error::Config("dataset needs a name, file paths or a synthetic spec".into()))?;
        let manifest_path = self.manifest.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_MANIFEST));
        if manifest_path.exists() {
            let manifest = Manifest::load(&manifest_path)?;
            if manifest.datasets.contains_key(name) {
                return manifest.resolve(name);
            }
        }
        if name == "synthetic" {
            return generate_synthetic(&SyntheticSpec::four_clusters(0));
        }
        Err(Error::DatasetResolution(format!(
            "{name} (not found in {})",
            manifest_path.display()
        )))
    }

    fn rebase(&mut self, base: &Path) {
        for p in [&mut self.manifest, &mut self.nodes, &mut self.edges, &mut self.splits]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if self.manifest.is_none() && self.name.is_some() {
            self.manifest = Some(base.join(DEFAULT_MANIFEST));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnSettings {
    pub hidden: usize,
    /// Number of graph-convolution layers.
    pub layers: usize,
    pub learning_rate: f64,
    pub iterations: usize,
    pub weight_decay: f64,
    pub dropout: f64,
    pub decay_scope: DecayScope,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub early_stop_patience: Option<usize>,
}

impl Default for GcnSettings {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            layers: 2,
            learning_rate: DEFAULT_LEARNING_RATE,
            iterations: DEFAULT_ITERATIONS,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            dropout: 0.0,
            decay_scope: DecayScope::All,
            early_stop_patience: None,
        }
    }
}

impl GcnSettings {
    pub fn to_config(&self, input_dim: usize, num_classes: usize, seed: u64) -> GcnConfig {
        let mut layer_dims = vec![input_dim];
        layer_dims.extend(std::iter::repeat_n(self.hidden, self.layers.saturating_sub(1)));
        layer_dims.push(num_classes);
        GcnConfig {
            layer_dims,
            learning_rate: self.learning_rate,
            iterations: self.iterations,
            weight_decay: self.weight_decay,
            dropout: self.dropout,
            seed,
            decay_scope: self.decay_scope,
            early_stop_patience: self.early_stop_patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSettings {
    pub n_resamples: usize,
    pub level: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            n_resamples: DEFAULT_RESAMPLES,
            level: DEFAULT_LEVEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSettings {
    pub alpha_loss: f64,
    pub delta: f64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self {
            alpha_loss: DEFAULT_ALPHA_LOSS,
            delta: DEFAULT_DELTA,
        }
    }
}

fn default_classifiers() -> Vec<ClassifierKind> {
    ClassifierKind::default_registry()
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_runs() -> usize {
    30
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_jobs() -> usize {
    1
}

/// Everything an experiment needs; a minimal file names only the dataset.
///
/// ```toml
/// aggregation = "voting"
/// n_runs = 30
///
/// [dataset]
/// name = "cora"
///
/// [[classifiers]]
/// kind = "knn"
/// k = 5
///
/// [gcn]
/// iterations = 500
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub aggregation: AggregationChoice,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub gcn: GcnSettings,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub bootstrap: BootstrapSettings,
    #[serde(default)]
    pub bound: BoundSettings,
    /// Write the first seed's trained models as JSON checkpoints.
    #[serde(default)]
    pub save_checkpoints: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetConfig) -> Self {
        Self {
            dataset,
            classifiers: default_classifiers(),
            aggregation: AggregationChoice::default(),
            methods: default_methods(),
            gcn: GcnSettings::default(),
            n_runs: default_runs(),
            seed: 0,
            out_dir: default_out(),
            jobs: default_jobs(),
            bootstrap: BootstrapSettings::default(),
            bound: BoundSettings::default(),
            save_checkpoints: false,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Parses a config file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.dataset.rebase(base);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        let stacked = self
            .methods
            .iter()
            .any(|m| matches!(m, Method::StackGcn | Method::StackOnly));
        if stacked && self.classifiers.is_empty() {
            return Err(Error::Config("classifier list is empty".into()));
        }
        if self.gcn.layers == 0 || self.gcn.hidden == 0 {
            return Err(Error::Config("gcn.layers and gcn.hidden must be >= 1".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_runs as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }
}
