//! Multi-class AdaBoost (SAMME) over depth-1 Gini stumps.

use ndarray::{ArrayView1, ArrayView2};

use super::tree::DecisionTree;

/// Weighted errors are clamped away from zero so a perfect stump receives
/// a large but finite vote.
const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoost {
    stumps: Vec<DecisionTree>,
    alphas: Vec<f64>,
    num_classes: usize,
}

impl AdaBoost {
    pub(super) fn fit(x: ArrayView2<'_, f64>, labels: &[usize], num_classes: usize, n_rounds: usize) -> Self {
        let m = x.nrows();
        let k = num_classes as f64;
        let mut weights = vec![1.0 / m as f64; m];
        let mut stumps = Vec::new();
        let mut alphas = Vec::new();
        for _ in 0..n_rounds {
            let stump = DecisionTree::fit_weighted(x, labels, num_classes, 1, &weights);
            let miss: Vec<bool> = x
                .rows()
                .into_iter()
                .zip(labels)
                .map(|(row, &y)| stump.predict_class(row) != y)
                .collect();
            let total: f64 = weights.iter().sum();
            let err = weights
                .iter()
                .zip(&miss)
                .filter(|(_, &m)| m)
                .map(|(w, _)| w)
                .sum::<f64>()
                / total;
            // No better than chance: the stump carries no information.
            if err >= 1.0 - 1.0 / k {
                if stumps.is_empty() {
                    stumps.push(stump);
                    alphas.push(1.0);
                }
                break;
            }
            let err = err.max(MIN_ERROR);
            let alpha = ((1.0 - err) / err).ln() + (k - 1.0).ln();
            stumps.push(stump);
            alphas.push(alpha);
            if err <= MIN_ERROR {
                break;
            }
            for (w, &m) in weights.iter_mut().zip(&miss) {
                if m {
                    *w *= alpha.exp();
                }
            }
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
        }
        Self {
            stumps,
            alphas,
            num_classes,
        }
    }

    pub fn rounds(&self) -> usize {
        self.stumps.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Sum of stage weights voting for each class.
    pub fn decision_scores(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let mut scores = vec![0.0; self.num_classes];
        for (s, &a) in self.stumps.iter().zip(&self.alphas) {
            scores[s.predict_class(x)] += a;
        }
        scores
    }

    /// Softmax of the scores scaled by `1 / (K - 1)`.
    pub(super) fn predict_row(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        let scale = 1.0 / (self.num_classes.max(2) - 1) as f64;
        let scores = self.decision_scores(x);
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, s) in out.iter_mut().zip(&scores) {
            *o = ((s - max) * scale).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
}
