//! Rademacher-complexity generalization bound for two-layer GCNs and the
//! neighbor-aggregation norm inequality it rests on.
//!
//! ```text
//! E(f) <= E_N(f) + 2 α √(2q) K B1 B2 R Σ_s M_s / √m + √(2 ln(2/δ) / N)
//! ```

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::gcn::{forward, masked_cross_entropy, GcnModel};
use crate::graph::{max_feature_norm, neighbor_stats, row_norm_max, Graph, NormalizedAdjacency};

/// Lipschitz constant used for softmax cross-entropy unless overridden.
pub const DEFAULT_ALPHA_LOSS: f64 = 1.0;
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub alpha_loss: f64,
    pub num_classes: usize,
    /// Frobenius norm of `W(0)`.
    pub b1: f64,
    /// Frobenius norm of `W(1)`.
    pub b2: f64,
    /// Largest input feature-row norm.
    pub r: f64,
    pub q: usize,
    pub m_s: Vec<f64>,
    /// Labelled sample count.
    pub m: usize,
    pub num_nodes: usize,
    pub delta: f64,
    pub empirical_risk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub rademacher_term: f64,
    pub confidence_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub terms: BoundTerms,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if !(self.alpha_loss > 0.0 && self.alpha_loss.is_finite()) {
            return bad(format!("alpha_loss = {} must be positive", self.alpha_loss));
        }
        if self.num_classes == 0 || self.q == 0 || self.m == 0 || self.num_nodes == 0 {
            return bad("K, q, m and N must all be >= 1".into());
        }
        if self.m_s.len() != self.q {
            return bad(format!("{} M_s values for q = {}", self.m_s.len(), self.q));
        }
        let nonneg = [self.b1, self.b2, self.r, self.empirical_risk]
            .into_iter()
            .chain(self.m_s.iter().copied());
        for v in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("bound input {v} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

pub fn evaluate_bound(inp: &BoundInputs) -> Result<BoundTerms> {
    inp.validate()?;
    let sum_m: f64 = inp.m_s.iter().sum();
    let rademacher_term =
        2.0 * inp.alpha_loss * (2.0 * inp.q as f64).sqrt() * inp.num_classes as f64 * inp.b1 * inp.b2 * inp.r * sum_m
            / (inp.m as f64).sqrt();
    let confidence_term = (2.0 * (2.0 / inp.delta).ln() / inp.num_nodes as f64).sqrt();
    Ok(BoundTerms {
        rademacher_term,
        confidence_term,
        total: inp.empirical_risk + rademacher_term + confidence_term,
    })
}

fn frobenius(w: ArrayView2<'_, f64>) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Assembles the bound inputs from a trained two-layer model. `x` is the
/// matrix the model was trained on (raw or aggregated features); `R` is
/// its largest row norm.
pub fn bound_from_model(
    model: &GcnModel,
    bundle: &DatasetBundle,
    adj: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
    alpha_loss: f64,
    delta: f64,
) -> Result<BoundReport> {
    if model.num_layers() != 2 {
        return Err(Error::BoundScope(model.num_layers()));
    }
    let stats = neighbor_stats(adj);
    let logits = forward(model, adj, x)?.logits;
    let inputs = BoundInputs {
        alpha_loss,
        num_classes: bundle.graph.num_classes(),
        b1: frobenius(model.weights()[0].view()),
        b2: frobenius(model.weights()[1].view()),
        r: row_norm_max(x),
        q: stats.q,
        m_s: stats.magnitudes,
        m: bundle.splits.num_labelled(),
        num_nodes: bundle.graph.num_nodes(),
        delta,
        empirical_risk: masked_cross_entropy(logits.view(), bundle.graph.labels(), &bundle.splits.train),
    };
    let terms = evaluate_bound(&inputs)?;
    Ok(BoundReport { inputs, terms })
}

/// Largest ratio `‖Σ_j Â[v][j] x_j‖² / (R² q)` over nodes; must not
/// exceed 1. Graphs with all-zero features return 0.
pub fn check_lemma3(g: &Graph, adj: &NormalizedAdjacency) -> f64 {
    let r = max_feature_norm(g);
    if r == 0.0 {
        return 0.0;
    }
    let q = neighbor_stats(adj).q as f64;
    let x = g.features();
    let denom = r * r * q;
    adj.rows()
        .map(|row| {
            let mut acc = vec![0.0; x.ncols()];
            for &(j, a) in row {
                for (s, v) in acc.iter_mut().zip(x.row(j)) {
                    *s += a * v;
                }
            }
            acc.iter().map(|v| v * v).sum::<f64>() / denom
        })
        .fold(0.0, f64::max)
}
