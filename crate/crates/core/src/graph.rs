//! Graph representation, symmetric adjacency normalization and split
//! bookkeeping.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Largest node count for which [`NormalizedAdjacency::to_dense`] will
/// materialize an `N × N` matrix by default.
pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// An undirected, unweighted graph with node features and class labels.
///
/// Edges are stored canonicalized: each undirected edge once as `(i, j)`
/// with `i < j`, sorted, without duplicates or self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, canonicalizing the edge list.
    ///
    /// Duplicate edges collapse to one and input self-loops are dropped
    /// (normalization adds them back through `A + I`).
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::InvalidGraph(format!("{} labels for {} nodes", labels.len(), n)));
        }
        if num_classes < 2 {
            return Err(Error::InvalidGraph(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if let Some((v, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::InvalidGraph(format!(
                "node {v} has label {l} outside [0, {num_classes})"
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGraph("non-finite feature value".into()));
        }
        let mut canon = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) has an endpoint outside [0, {n})"
                )));
            }
            if a != b {
                canon.insert((a.min(b), a.max(b)));
            }
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            edges: canon.into_iter().collect(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Canonical undirected edges, `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbor lists (excluding the node itself), sorted ascending.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.num_nodes()];
        for &(a, b) in &self.edges {
            lists[a].push(b);
            lists[b].push(a);
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        lists
    }
}

/// Disjoint train/validation/test node index sets.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>, num_nodes: usize) -> Result<Self> {
        let split = Self { train, val, test };
        split.validate(num_nodes)?;
        Ok(split)
    }

    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::InvalidSplit("train split is empty".into()));
        }
        let mut owner = vec![None; num_nodes];
        for (name, idx) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &v in idx {
                if v >= num_nodes {
                    return Err(Error::InvalidSplit(format!(
                        "{name} index {v} outside [0, {num_nodes})"
                    )));
                }
                if let Some(prev) = owner[v] {
                    return Err(Error::InvalidSplit(format!(
                        "node {v} appears in both {prev} and {name}"
                    )));
                }
                owner[v] = Some(name);
            }
        }
        Ok(())
    }

    /// Number of labelled training nodes.
    pub fn num_labelled(&self) -> usize {
        self.train.len()
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`, stored as sorted per-row nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    rows: Vec<Vec<(usize, f64)>>,
}

impl NormalizedAdjacency {
    /// The `n × n` identity, which turns a GCN into a plain MLP.
    pub fn identity(n: usize) -> Self {
        Self {
            rows: (0..n).map(|i| vec![(i, 1.0)]).collect(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    /// Nonzeros of row `i` as `(column, value)`, columns ascending.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Result<Array2<f64>> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<Array2<f64>> {
        let n = self.num_nodes();
        if n > cap {
            return Err(Error::DenseCap { nodes: n, cap });
        }
        let mut dense = Array2::zeros((n, n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                dense[[i, j]] = v;
            }
        }
        Ok(dense)
    }

    /// Sparse-times-dense product `Â · x`.
    pub fn matmul(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.num_nodes() {
            return Err(Error::Shape(format!(
                "adjacency is {n}×{n} but right operand has {} rows",
                x.nrows(),
                n = self.num_nodes()
            )));
        }
        let mut out = Array2::zeros((x.nrows(), x.ncols()));
        for (i, row) in self.rows.iter().enumerate() {
            let mut dst = out.row_mut(i);
            for &(j, a) in row {
                dst.scaled_add(a, &x.row(j));
            }
        }
        Ok(out)
    }

    /// Power-iteration estimate of the spectral norm.
    pub fn spectral_norm(&self, iterations: usize) -> f64 {
        let n = self.num_nodes();
        if n == 0 {
            return 0.0;
        }
        // Deterministic non-degenerate start vector.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let mut norm = 0.0;
        for _ in 0..iterations.max(1) {
            let w: Vec<f64> = self
                .rows
                .iter()
                .map(|row| row.iter().map(|&(j, a)| a * v[j]).sum())
                .collect();
            norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = w.into_iter().map(|x| x / norm).collect();
        }
        norm
    }
}

/// Computes `Â = D̃^{-1/2} Ã D̃^{-1/2}` with `Ã = A + I`.
///
/// Isolated nodes are fine: their self-loop gives `D̃[i][i] = 1`.
pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let lists = g.adjacency_lists();
    let deg: Vec<usize> = lists.iter().map(|l| l.len() + 1).collect();
    let rows = lists
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let mut row: Vec<(usize, f64)> = nbrs
                .iter()
                .chain(std::iter::once(&i))
                .map(|&j| (j, 1.0 / ((deg[i] * deg[j]) as f64).sqrt()))
                .collect();
            row.sort_unstable_by_key(|&(j, _)| j);
            row
        })
        .collect();
    NormalizedAdjacency { rows }
}

/// Neighborhood statistics entering the generalization bound.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborStats {
    /// Largest row support of `Â`, self-loop included.
    pub q: usize,
    /// `magnitudes[s]` is the largest `s`-th ranked absolute entry over all
    /// rows, ranking each row's nonzeros by decreasing magnitude.
    pub magnitudes: Vec<f64>,
}

pub fn neighbor_stats(adj: &NormalizedAdjacency) -> NeighborStats {
    let q = adj.rows().map(<[_]>::len).max().unwrap_or(0);
    let mut magnitudes = vec![0.0_f64; q];
    for row in adj.rows() {
        let mut mags: Vec<f64> = row.iter().map(|&(_, v)| v.abs()).collect();
        mags.sort_unstable_by(|a, b| b.total_cmp(a));
        for (slot, m) in magnitudes.iter_mut().zip(mags) {
            *slot = slot.max(m);
        }
    }
    NeighborStats { q, magnitudes }
}

/// Largest Euclidean norm of a feature row.
pub fn max_feature_norm(g: &Graph) -> f64 {
    row_norm_max(g.features())
}

pub(crate) fn row_norm_max(x: ArrayView2<'_, f64>) -> f64 {
    x.rows().into_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        let labels = (0..n).map(|i| i % 2).collect();
        Graph::new(Array2::zeros((n, 1)), labels, 2, edges.iter().copied()).unwrap()
    }

    #[test]
    fn single_node_normalizes_to_one() {
        let adj = normalize_adjacency(&graph(1, &[]));
        assert_eq!(adj.to_dense().unwrap(), array![[1.0]]);
    }

    #[test]
    fn single_edge_is_all_halves() {
        let adj = normalize_adjacency(&graph(2, &[(0, 1)]));
        assert_eq!(adj.to_dense().unwrap(), array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn path_of_three() {
        let adj = normalize_adjacency(&graph(3, &[(0, 1), (1, 2)]));
        // Degrees with self-loop: 2, 3, 2.
        assert!((adj.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((adj.get(0, 1) - 0.408248).abs() < 1e-6);
        assert_eq!(adj.get(0, 0), 0.5);
        assert!((adj.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(adj.get(0, 2), 0.0);
    }

    #[test]
    fn duplicates_and_self_loops_collapse() {
        let g = graph(3, &[(0, 1), (1, 0), (0, 1), (2, 2)]);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(normalize_adjacency(&g).get(2, 2), 1.0);
    }

    #[test]
    fn rejects_out_of_range_edges_and_labels() {
        let e = Graph::new(Array2::zeros((2, 1)), vec![0, 1], 2, [(0, 2)]);
        assert!(matches!(e, Err(Error::InvalidGraph(_))));
        let e = Graph::new(Array2::zeros((2, 1)), vec![0, 2], 2, []);
        assert!(matches!(e, Err(Error::InvalidGraph(_))));
        let e = Graph::new(Array2::zeros((2, 1)), vec![0, 0], 1, []);
        assert!(matches!(e, Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn neighbor_stats_small_cases() {
        let s = neighbor_stats(&normalize_adjacency(&graph(1, &[])));
        assert_eq!(s.q, 1);
        assert_eq!(s.magnitudes, vec![1.0]);

        let s = neighbor_stats(&normalize_adjacency(&graph(2, &[(0, 1)])));
        assert_eq!(s.q, 2);
        assert_eq!(s.magnitudes, vec![0.5, 0.5]);
    }

    #[test]
    fn neighbor_stats_star_matches_row_enumeration() {
        let adj = normalize_adjacency(&graph(4, &[(0, 1), (0, 2), (0, 3)]));
        let s = neighbor_stats(&adj);
        assert_eq!(s.q, 4);
        // Brute force over the dense matrix.
        let dense = adj.to_dense().unwrap();
        let mut expected = vec![0.0_f64; 4];
        for row in dense.rows() {
            let mut nz: Vec<f64> = row.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
            nz.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (s, v) in nz.into_iter().enumerate() {
                expected[s] = expected[s].max(v);
            }
        }
        assert_eq!(s.magnitudes, expected);
        assert_eq!(s.magnitudes[0], 0.5);
        assert!((s.magnitudes[1] - 8f64.sqrt().recip()).abs() < 1e-15);
        assert_eq!(s.magnitudes[3], 0.25);
    }

    #[test]
    fn max_feature_norm_cases() {
        let g = Graph::new(Array2::zeros((3, 2)), vec![0, 1, 0], 2, []).unwrap();
        assert_eq!(max_feature_norm(&g), 0.0);
        let g = Graph::new(array![[3.0, 4.0]], vec![1], 2, []).unwrap();
        assert_eq!(max_feature_norm(&g), 5.0);
        let x = array![
            [0.3, -1.2, 0.5],
            [2.0, 0.1, -0.4],
            [-0.7, 0.7, 0.7],
            [1.5, 1.5, -1.5],
            [0.0, 0.0, 0.2]
        ];
        let brute = (0..5)
            .map(|i| (0..3).map(|j| x[[i, j]] * x[[i, j]]).sum::<f64>().sqrt())
            .fold(f64::MIN, f64::max);
        let g = Graph::new(x, vec![0, 1, 0, 1, 0], 2, []).unwrap();
        assert_eq!(max_feature_norm(&g), brute);
    }

    #[test]
    fn split_validation() {
        assert!(SplitSpec::new(vec![0], vec![1], vec![2], 3).is_ok());
        assert!(SplitSpec::new(vec![], vec![1], vec![2], 3).is_err());
        assert!(SplitSpec::new(vec![0], vec![0], vec![2], 3).is_err());
        assert!(SplitSpec::new(vec![0], vec![1], vec![3], 3).is_err());
    }

    #[test]
    fn dense_cap_is_enforced() {
        let adj = NormalizedAdjacency::identity(5);
        assert!(matches!(adj.to_dense_capped(4), Err(Error::DenseCap { .. })));
    }

    #[test]
    fn matmul_matches_dense_product() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let adj = normalize_adjacency(&g);
        let x = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0], [-2.0, 1.0]];
        let sparse = adj.matmul(x.view()).unwrap();
        let dense = adj.to_dense().unwrap().dot(&x);
        assert!((sparse - dense).iter().all(|d| d.abs() < 1e-15));
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (1usize..25).prop_flat_map(|n| {
            (
                proptest::collection::vec((0..n, 0..n), 0..60),
                proptest::collection::vec(-3.0f64..3.0, n * 3),
            )
                .prop_map(move |(edges, feats)| {
                    let x = Array2::from_shape_vec((n, 3), feats).unwrap();
                    Graph::new(x, (0..n).map(|i| i % 2).collect(), 2, edges).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn normalized_is_symmetric_with_positive_diagonal(g in arb_graph()) {
            let adj = normalize_adjacency(&g);
            for i in 0..g.num_nodes() {
                prop_assert!(adj.get(i, i) > 0.0);
                for &(j, v) in adj.row(i) {
                    prop_assert_eq!(v, adj.get(j, i));
                }
            }
            prop_assert!(adj.spectral_norm(200) <= 1.0 + 1e-9);
        }

        #[test]
        fn propagated_rows_respect_neighbor_bound(g in arb_graph()) {
            let adj = normalize_adjacency(&g);
            let r = max_feature_norm(&g);
            let q = neighbor_stats(&adj).q as f64;
            let ax = adj.matmul(g.features()).unwrap();
            for row in ax.rows() {
                prop_assert!(row.dot(&row) <= r * r * q * (1.0 + 1e-12) + 1e-300);
            }
        }
    }
}
