//! CART classification trees (Gini impurity) and bagged random forests.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gains within this distance of the incumbent count as ties, which keep
/// the earlier (lower feature, lower threshold) candidate.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;

/// A chosen split: rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf { dist: Vec<f64> },
    Internal { split: Split, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    num_classes: usize,
}

/// Weighted Gini impurity of a class-weight histogram.
pub fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    labels: &'a [usize],
    num_classes: usize,
    max_depth: usize,
    min_leaf: usize,
    max_features: usize,
    rng: Option<ChaCha8Rng>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// `samples` holds `(row, weight)` pairs; rows may repeat.
    fn build(&mut self, samples: &mut [(usize, f64)], depth: usize) -> usize {
        let mut counts = vec![0.0; self.num_classes];
        for &(r, w) in samples.iter() {
            counts[self.labels[r]] += w;
        }
        let id = self.nodes.len();
        let split = if depth < self.max_depth && samples.len() >= 2 * self.min_leaf && gini(&counts) > 0.0 {
            self.best_split(samples, &counts)
        } else {
            None
        };
        let Some(split) = split else {
            let total: f64 = counts.iter().sum();
            let dist = counts.iter().map(|c| c / total).collect();
            self.nodes.push(Node::Leaf { dist });
            return id;
        };
        // Placeholder, patched once both children exist.
        self.nodes.push(Node::Leaf { dist: Vec::new() });
        let x = self.x;
        let pivot = partition(samples, |&(r, _)| x[[r, split.feature]] <= split.threshold);
        let (l, r) = samples.split_at_mut(pivot);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Internal { split, left, right };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match self.rng.as_mut() {
            Some(rng) if self.max_features < d => {
                let mut f = index::sample(rng, d, self.max_features).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, samples: &[(usize, f64)], counts: &[f64]) -> Option<Split> {
        let total: f64 = counts.iter().sum();
        let parent = gini(counts);
        let mut best: Option<Split> = None;
        let mut order: Vec<(f64, usize, f64)> = Vec::with_capacity(samples.len());
        for f in self.candidate_features() {
            order.clear();
            order.extend(samples.iter().map(|&(r, w)| (self.x[[r, f]], self.labels[r], w)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0.0; self.num_classes];
            let mut left_w = 0.0;
            for i in 0..order.len() - 1 {
                let (v, y, w) = order[i];
                left[y] += w;
                left_w += w;
                let next = order[i + 1].0;
                if next <= v {
                    continue;
                }
                let n_left = i + 1;
                if n_left < self.min_leaf || order.len() - n_left < self.min_leaf {
                    continue;
                }
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                let right: Vec<f64> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let right_w = total - left_w;
                let gain = parent - (left_w / total) * gini(&left) - (right_w / total) * gini(&right);
                if best.is_none_or(|b| gain > b.gain + GAIN_TIE_TOLERANCE) {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Stable-order-agnostic in-place partition; returns the count of items
/// satisfying `pred`, which end up first.
fn partition<T>(items: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let mut next = 0;
    for i in 0..items.len() {
        if pred(&items[i]) {
            items.swap(i, next);
            next += 1;
        }
    }
    next
}

impl DecisionTree {
    pub(super) fn fit(
        x: ArrayView2<'_, f64>,
        labels: &[usize],
        num_classes: usize,
        max_depth: usize,
        min_leaf: usize,
    ) -> Self {
        let mut samples: Vec<(usize, f64)> = (0..x.nrows()).map(|r| (r, 1.0)).collect();
        Self::fit_samples(
            x,
            labels,
            num_classes,
            max_depth,
            min_leaf,
            x.ncols(),
            None,
            &mut samples,
        )
    }

    pub(super) fn fit_weighted(
        x: ArrayView2<'_, f64>,
        labels: &[usize],
        num_classes: usize,
        max_depth: usize,
        weights: &[f64],
    ) -> Self {
        let mut samples: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
        Self::fit_samples(x, labels, num_classes, max_depth, 1, x.ncols(), None, &mut samples)
    }

    #[allow(clippy::too_many_arguments)]
    fn fit_samples(
        x: ArrayView2<'_, f64>,
        labels: &[usize],
        num_classes: usize,
        max_depth: usize,
        min_leaf: usize,
        max_features: usize,
        rng: Option<ChaCha8Rng>,
        samples: &mut [(usize, f64)],
    ) -> Self {
        let mut b = Builder {
            x,
            labels,
            num_classes,
            max_depth,
            min_leaf,
            max_features,
            rng,
            nodes: Vec::new(),
        };
        b.build(samples, 0);
        Self {
            nodes: b.nodes,
            num_classes,
        }
    }

    pub fn root_split(&self) -> Option<Split> {
        match self.nodes[0] {
            Node::Internal { split, .. } => Some(split),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Class frequencies of the leaf `x` falls into.
    pub fn leaf_distribution(&self, x: ArrayView1<'_, f64>) -> &[f64] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { dist } => return dist,
                Node::Internal { split, left, right } => {
                    id = if x[split.feature] <= split.threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict_class(&self, x: ArrayView1<'_, f64>) -> usize {
        super::argmax(self.leaf_distribution(x))
    }

    pub(super) fn predict_row(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_classes);
        out.copy_from_slice(self.leaf_distribution(x));
    }
}

/// Bootstrap-aggregated trees with per-split feature subsampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub(super) fn fit(
        x: ArrayView2<'_, f64>,
        labels: &[usize],
        num_classes: usize,
        n_trees: usize,
        max_depth: usize,
        max_features: Option<usize>,
        seed: u64,
    ) -> Self {
        let m = x.nrows();
        let d = x.ncols();
        let max_features = max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1));
        let trees = (0..n_trees)
            .map(|t| {
                // Tree `t` draws from stream `t` of the forest seed.
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t as u64);
                let mut samples: Vec<(usize, f64)> = (0..m).map(|_| (rng.random_range(0..m), 1.0)).collect();
                DecisionTree::fit_samples(
                    x,
                    labels,
                    num_classes,
                    max_depth,
                    1,
                    max_features,
                    Some(rng),
                    &mut samples,
                )
            })
            .collect();
        Self { trees }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub(super) fn predict_row(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        for t in &self.trees {
            for (o, p) in out.iter_mut().zip(t.leaf_distribution(x)) {
                *o += p;
            }
        }
        let n = self.trees.len() as f64;
        for o in out.iter_mut() {
            *o /= n;
        }
    }
}
