//! Dataset bundles: plain-text loaders/writers, dataset manifests,
//! embedding export, and the synthetic cluster-graph generator.
//!
//! On-disk bundle layout:
//!
//! * `nodes.csv`: header `id,label,f0,...,f{d-1}`, one node per row.
//! * `edges.csv`: header `src,dst`, one undirected edge per row, given by
//!   node id. Duplicates and self-loops are tolerated and collapsed.
//! * `splits.json`: `{"train": [...], "val": [...], "test": [...]}` of node
//!   ids (JSON numbers or strings).

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, SplitSpec};

pub const NODES_FILE: &str = "nodes.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const SPLITS_FILE: &str = "splits.json";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub graph: Graph,
    pub splits: SplitSpec,
    /// External id of each node, in index order.
    pub node_ids: Vec<String>,
    /// Original label string of each dense class index.
    pub label_names: Vec<String>,
    /// Number of data rows in the source edge file (before deduplication).
    pub source_edge_rows: usize,
}

impl DatasetBundle {
    pub fn new(
        name: impl Into<String>,
        graph: Graph,
        splits: SplitSpec,
        node_ids: Vec<String>,
        label_names: Vec<String>,
        source_edge_rows: usize,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidArgument("dataset name is empty".into()));
        }
        splits.validate(graph.num_nodes())?;
        if node_ids.len() != graph.num_nodes() || label_names.len() != graph.num_classes() {
            return Err(Error::InvalidArgument(
                "node id or label name count does not match the graph".into(),
            ));
        }
        Ok(Self {
            name,
            graph,
            splits,
            node_ids,
            label_names,
            source_edge_rows,
        })
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn record_line(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

/// Sorts label strings numerically when every label is an integer,
/// lexicographically otherwise.
fn sorted_label_names(labels: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut names: Vec<String> = labels.into_iter().collect();
    names.sort();
    names.dedup();
    if names.iter().all(|s| s.parse::<i64>().is_ok()) {
        names.sort_by_key(|s| s.parse::<i64>().unwrap());
    }
    names
}

/// Loads a bundle from the three bundle files. The dataset name is taken
/// from the directory holding `nodes_path`.
pub fn load_bundle(
    nodes_path: impl AsRef<Path>,
    edges_path: impl AsRef<Path>,
    splits_path: impl AsRef<Path>,
) -> Result<DatasetBundle> {
    let nodes_path = nodes_path.as_ref();
    let name = nodes_path
        .parent()
        .and_then(Path::file_name)
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .unwrap_or("dataset")
        .to_string();
    load_bundle_named(name, nodes_path, edges_path.as_ref(), splits_path.as_ref())
}

pub fn load_bundle_named(
    name: impl Into<String>,
    nodes_path: &Path,
    edges_path: &Path,
    splits_path: &Path,
) -> Result<DatasetBundle> {
    let (node_ids, raw_labels, features) = read_nodes(nodes_path)?;
    let index: HashMap<&str, usize> = node_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if index.len() != node_ids.len() {
        return Err(parse_err(nodes_path, 0, "duplicate node id"));
    }

    let label_names = sorted_label_names(raw_labels.iter().cloned());
    if label_names.len() < 2 {
        return Err(Error::InvalidGraph(format!(
            "{}: need at least 2 distinct labels, found {}",
            nodes_path.display(),
            label_names.len()
        )));
    }
    let label_index: HashMap<&str, usize> = label_names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|l| label_index[l.as_str()]).collect();

    let (edges, source_edge_rows) = read_edges(edges_path, &index)?;
    let splits = read_splits(splits_path, &index)?;

    let graph = Graph::new(features, labels, label_names.len(), edges)?;
    DatasetBundle::new(name, graph, splits, node_ids, label_names, source_edge_rows)
}

type NodeRows = (Vec<String>, Vec<String>, Array2<f64>);

fn read_nodes(path: &Path) -> Result<NodeRows> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[1] != "label" {
        return Err(parse_err(path, 1, "expected header `id,label,f0,...`"));
    }
    let d = headers.len() - 2;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, k + 2, e.to_string()))?;
        let line = record_line(&rec, k + 2);
        if rec.len() != d + 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", d + 2, rec.len()),
            ));
        }
        ids.push(rec[0].to_string());
        labels.push(rec[1].to_string());
        for (c, field) in rec.iter().skip(2).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("feature column {c}: `{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("feature column {c} is not finite")));
            }
            values.push(v);
        }
    }
    if ids.is_empty() {
        return Err(parse_err(path, 1, "no nodes"));
    }
    let features = Array2::from_shape_vec((ids.len(), d), values).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((ids, labels, features))
}

fn read_edges(path: &Path, index: &HashMap<&str, usize>) -> Result<(Vec<(usize, usize)>, usize)> {
    let mut rdr = open_csv(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "src" || &headers[1] != "dst" {
        return Err(parse_err(path, 1, "expected header `src,dst`"));
    }
    let mut edges = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, k + 2, e.to_string()))?;
        let line = record_line(&rec, k + 2);
        if rec.len() != 2 {
            return Err(parse_err(path, line, "expected 2 fields"));
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| parse_err(path, line, format!("unknown node id `{id}`")))
        };
        edges.push((lookup(&rec[0])?, lookup(&rec[1])?));
    }
    let rows = edges.len();
    Ok((edges, rows))
}

fn read_splits(path: &Path, index: &HashMap<&str, usize>) -> Result<SplitSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    let field = |key: &str| -> Result<Vec<usize>> {
        let arr = match value.get(key) {
            None => return Ok(Vec::new()),
            Some(serde_json::Value::Array(a)) => a,
            Some(_) => return Err(parse_err(path, 0, format!("`{key}` is not an array"))),
        };
        arr.iter()
            .map(|v| {
                let id = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => n.to_string(),
                    other => return Err(parse_err(path, 0, format!("bad node id {other} in `{key}`"))),
                };
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| parse_err(path, 0, format!("unknown node id `{id}` in `{key}`")))
            })
            .collect()
    };
    let split = SplitSpec {
        train: field("train")?,
        val: field("val")?,
        test: field("test")?,
    };
    split.validate(index.len())?;
    Ok(split)
}

fn json_id(id: &str) -> serde_json::Value {
    match id.parse::<u64>() {
        Ok(n) if n.to_string() == id => serde_json::Value::from(n),
        _ => serde_json::Value::from(id),
    }
}

/// Writes `nodes.csv`, `edges.csv` and `splits.json` into `dir`.
pub fn write_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let g = &bundle.graph;

    let nodes_path = dir.join(NODES_FILE);
    let mut w = csv::Writer::from_path(&nodes_path)?;
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..g.feature_dim()).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (i, row) in g.features().rows().into_iter().enumerate() {
        let mut rec = vec![bundle.node_ids[i].clone(), bundle.label_names[g.labels()[i]].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&nodes_path, e))?;

    let edges_path = dir.join(EDGES_FILE);
    let mut w = csv::Writer::from_path(&edges_path)?;
    w.write_record(["src", "dst"])?;
    for &(a, b) in g.edges() {
        w.write_record([&bundle.node_ids[a], &bundle.node_ids[b]])?;
    }
    w.flush().map_err(|e| Error::io(&edges_path, e))?;

    let ids = |idx: &[usize]| -> Vec<serde_json::Value> { idx.iter().map(|&i| json_id(&bundle.node_ids[i])).collect() };
    let splits = serde_json::json!({
        "train": ids(&bundle.splits.train),
        "val": ids(&bundle.splits.val),
        "test": ids(&bundle.splits.test),
    });
    let splits_path = dir.join(SPLITS_FILE);
    std::fs::write(&splits_path, serde_json::to_string_pretty(&splits)? + "\n")
        .map_err(|e| Error::io(&splits_path, e))?;
    Ok(())
}

/// Loads a bundle previously written by [`write_bundle`].
pub fn load_bundle_dir(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    load_bundle(dir.join(NODES_FILE), dir.join(EDGES_FILE), dir.join(SPLITS_FILE))
}

/// Paths of one dataset inside a manifest.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestEntry {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub splits: PathBuf,
}

/// Maps CLI-visible dataset names to bundle files. Relative paths resolve
/// against the manifest's directory.
///
/// ```toml
/// [datasets.cora]
/// nodes = "cora/nodes.csv"
/// edges = "cora/edges.csv"
/// splits = "cora/splits.json"
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    #[serde(default)]
    pub datasets: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for entry in manifest.datasets.values_mut() {
            for p in [&mut entry.nodes, &mut entry.edges, &mut entry.splits] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(manifest)
    }

    pub fn resolve(&self, name: &str) -> Result<DatasetBundle> {
        let entry = self
            .datasets
            .get(name)
            .ok_or_else(|| Error::DatasetResolution(name.to_string()))?;
        load_bundle_named(name, &entry.nodes, &entry.edges, &entry.splits)
    }
}

fn default_train_frac() -> f64 {
    0.1
}

fn default_val_frac() -> f64 {
    0.1
}

/// Parameters of the planted-partition generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_clusters: usize,
    pub nodes_per_cluster: usize,
    pub feature_dim: usize,
    pub intra_edge_prob: f64,
    pub inter_edge_prob: f64,
    pub feature_noise: f64,
    pub seed: u64,
    #[serde(default = "default_train_frac")]
    pub train_frac: f64,
    #[serde(default = "default_val_frac")]
    pub val_frac: f64,
}

impl SyntheticSpec {
    /// The 4-cluster, 200-node graph used by the acceptance suite.
    pub fn four_clusters(seed: u64) -> Self {
        Self {
            num_clusters: 4,
            nodes_per_cluster: 50,
            feature_dim: 64,
            intra_edge_prob: 0.1,
            inter_edge_prob: 0.01,
            feature_noise: 0.5,
            seed,
            train_frac: default_train_frac(),
            val_frac: default_val_frac(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.num_clusters < 2 {
            return bad(format!("num_clusters = {} < 2", self.num_clusters));
        }
        if self.nodes_per_cluster < 2 {
            return bad(format!("nodes_per_cluster = {} < 2", self.nodes_per_cluster));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim = 0".into());
        }
        if !(0.0 <= self.inter_edge_prob && self.inter_edge_prob < self.intra_edge_prob && self.intra_edge_prob <= 1.0)
        {
            return bad(format!(
                "edge probabilities must satisfy 0 <= inter ({}) < intra ({}) <= 1",
                self.inter_edge_prob, self.intra_edge_prob
            ));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return bad(format!("feature_noise = {} must be >= 0", self.feature_noise));
        }
        if !(self.train_frac > 0.0 && self.val_frac >= 0.0 && self.train_frac + self.val_frac < 1.0) {
            return bad("train_frac/val_frac must be positive and sum below 1".into());
        }
        Ok(())
    }
}

/// Generates a planted-partition graph: node `i` belongs to cluster
/// `i / nodes_per_cluster`, its features are the one-hot centroid
/// `e_{c mod d}` plus isotropic Gaussian noise, and each pair is linked
/// with the intra- or inter-cluster probability. Splits are stratified.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let k = spec.num_clusters;
    let n = k * spec.nodes_per_cluster;
    let d = spec.feature_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let cluster = |i: usize| i / spec.nodes_per_cluster;
    let mut features = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            features[[i, j]] = spec.feature_noise * z;
        }
        features[[i, cluster(i) % d]] += 1.0;
    }

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if cluster(i) == cluster(j) {
                spec.intra_edge_prob
            } else {
                spec.inter_edge_prob
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..k {
        let mut members: Vec<usize> = (c * spec.nodes_per_cluster..(c + 1) * spec.nodes_per_cluster).collect();
        members.shuffle(&mut rng);
        let size = members.len() as f64;
        let n_train = ((spec.train_frac * size).round() as usize).clamp(1, members.len() - 1);
        let n_val = ((spec.val_frac * size).round() as usize).min(members.len() - n_train);
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    for s in [&mut train, &mut val, &mut test] {
        s.sort_unstable();
    }

    let labels: Vec<usize> = (0..n).map(cluster).collect();
    let source_edge_rows = edges.len();
    let graph = Graph::new(features, labels, k, edges)?;
    let splits = SplitSpec::new(train, val, test, n)?;
    let name = format!("synthetic-c{}x{}-d{}-s{}", k, spec.nodes_per_cluster, d, spec.seed);
    DatasetBundle::new(
        name,
        graph,
        splits,
        (0..n).map(|i| i.to_string()).collect(),
        (0..k).map(|c| c.to_string()).collect(),
        source_edge_rows,
    )
}

/// Writes one CSV row per node with header `node_id,dim_0,...`.
pub fn export_embeddings(matrix: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if matrix.is_empty() {
        return Err(Error::InvalidArgument("embedding matrix is empty".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write!(out, "node_id")?;
        for j in 0..matrix.ncols() {
            write!(out, ",dim_{j}")?;
        }
        writeln!(out)?;
        for (i, row) in matrix.rows().into_iter().enumerate() {
            write!(out, "{i}")?;
            for v in row {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Reads a file produced by [`export_embeddings`].
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut rdr = open_csv(path)?;
    let cols = rdr.headers()?.len().saturating_sub(1);
    let mut values = Vec::new();
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, k + 2, e.to_string()))?;
        let line = record_line(&rec, k + 2);
        if rec.len() != cols + 1 {
            return Err(parse_err(path, line, "wrong field count"));
        }
        for f in rec.iter().skip(1) {
            values.push(
                f.parse::<f64>()
                    .map_err(|_| parse_err(path, line, format!("`{f}` is not a number")))?,
            );
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Shape(e.to_string()))
}
