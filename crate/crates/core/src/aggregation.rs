//! Combining base-model prediction matrices into one `N × K` matrix.

use ndarray::{Array2, ArrayView2};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMethod {
    /// Element-wise mean of the probability rows.
    Mean,
    /// Mean of the classifiers' argmax labels, rounded to the nearest class
    /// index and one-hot encoded. Ordinal in the class ids; opt-in only.
    RoundedLabelMean,
    /// Softmax-of-cosine weighted sum against the training labels.
    Attention,
    /// Plurality of argmax votes, ties drawn uniformly with the seed.
    Voting { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedFeatures {
    pub matrix: Array2<f64>,
    pub method: AggregationMethod,
    /// Per-classifier weights; present only for attention.
    pub attention_weights: Option<Vec<f64>>,
}

fn check_shapes(preds: &[Array2<f64>]) -> Result<(usize, usize)> {
    let first = preds
        .first()
        .ok_or_else(|| Error::InvalidArgument("no prediction matrices to aggregate".into()))?;
    let shape = first.dim();
    if let Some((i, p)) = preds.iter().enumerate().find(|(_, p)| p.dim() != shape) {
        return Err(Error::Shape(format!(
            "prediction {i} is {:?}, expected {:?}",
            p.dim(),
            shape
        )));
    }
    Ok(shape)
}

pub fn aggregate(
    method: AggregationMethod,
    preds: &[Array2<f64>],
    labels: &[usize],
    train_idx: &[usize],
) -> Result<AggregatedFeatures> {
    match method {
        AggregationMethod::Mean => aggregate_mean(preds),
        AggregationMethod::RoundedLabelMean => aggregate_rounded_label_mean(preds),
        AggregationMethod::Attention => {
            let (_, k) = check_shapes(preds)?;
            let y = one_hot(train_idx.iter().map(|&i| labels[i]), k)?;
            aggregate_attention(preds, y.view(), train_idx)
        }
        AggregationMethod::Voting { seed } => aggregate_voting(preds, seed),
    }
}

/// One-hot rows for a label sequence.
pub fn one_hot(labels: impl IntoIterator<Item = usize>, num_classes: usize) -> Result<Array2<f64>> {
    let labels: Vec<usize> = labels.into_iter().collect();
    let mut y = Array2::zeros((labels.len(), num_classes));
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::InvalidArgument(format!("label {l} outside [0, {num_classes})")));
        }
        y[[i, l]] = 1.0;
    }
    Ok(y)
}

pub fn aggregate_mean(preds: &[Array2<f64>]) -> Result<AggregatedFeatures> {
    check_shapes(preds)?;
    let mut sum = preds[0].clone();
    for p in &preds[1..] {
        sum += p;
    }
    sum /= preds.len() as f64;
    Ok(AggregatedFeatures {
        matrix: sum,
        method: AggregationMethod::Mean,
        attention_weights: None,
    })
}

pub fn aggregate_rounded_label_mean(preds: &[Array2<f64>]) -> Result<AggregatedFeatures> {
    let (n, k) = check_shapes(preds)?;
    let mut out = Array2::zeros((n, k));
    for i in 0..n {
        let mean = preds
            .iter()
            .map(|p| argmax(p.row(i).as_slice().expect("standard layout")) as f64)
            .sum::<f64>()
            / preds.len() as f64;
        let c = (mean.round() as usize).min(k - 1);
        out[[i, c]] = 1.0;
    }
    Ok(AggregatedFeatures {
        matrix: out,
        method: AggregationMethod::RoundedLabelMean,
        attention_weights: None,
    })
}

fn cosine(a: impl Iterator<Item = f64> + Clone, b: impl Iterator<Item = f64> + Clone) -> f64 {
    let dot: f64 = a.clone().zip(b.clone()).map(|(x, y)| x * y).sum();
    let na: f64 = a.map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Weights each classifier by the softmax of the cosine similarity
/// between its flattened training-row block and the flattened one-hot
/// training labels, then takes the weighted sum over all rows.
pub fn aggregate_attention(
    preds: &[Array2<f64>],
    train_labels_onehot: ArrayView2<'_, f64>,
    train_idx: &[usize],
) -> Result<AggregatedFeatures> {
    let (n, k) = check_shapes(preds)?;
    if train_idx.is_empty() {
        return Err(Error::InvalidArgument("attention needs a non-empty train split".into()));
    }
    if train_labels_onehot.dim() != (train_idx.len(), k) {
        return Err(Error::Shape(format!(
            "label matrix is {:?}, expected ({}, {k})",
            train_labels_onehot.dim(),
            train_idx.len()
        )));
    }
    if let Some(&i) = train_idx.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("train index {i} outside [0, {n})")));
    }
    let cos: Vec<f64> = preds
        .iter()
        .map(|p| {
            let block = train_idx.iter().flat_map(|&i| p.row(i).to_vec());
            cosine(block, train_labels_onehot.iter().copied())
        })
        .collect();
    let weights = softmax(&cos);
    let mut out = Array2::zeros((n, k));
    for (p, &a) in preds.iter().zip(&weights) {
        out.scaled_add(a, p);
    }
    Ok(AggregatedFeatures {
        matrix: out,
        method: AggregationMethod::Attention,
        attention_weights: Some(weights),
    })
}

pub(crate) fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Hard plurality vote. Each classifier votes for its row argmax (lowest
/// class on ties); tied pluralities are resolved by a uniform draw from
/// the tied classes using one seeded stream consumed in node order.
pub fn aggregate_voting(preds: &[Array2<f64>], seed: u64) -> Result<AggregatedFeatures> {
    let (n, k) = check_shapes(preds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((n, k));
    let mut votes = vec![0usize; k];
    for i in 0..n {
        votes.iter_mut().for_each(|v| *v = 0);
        for p in preds {
            votes[argmax(p.row(i).as_slice().expect("standard layout"))] += 1;
        }
        let top = *votes.iter().max().expect("k >= 1");
        let tied: Vec<usize> = (0..k).filter(|&c| votes[c] == top).collect();
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            *tied.choose(&mut rng).expect("non-empty")
        };
        out[[i, winner]] = 1.0;
    }
    Ok(AggregatedFeatures {
        matrix: out,
        method: AggregationMethod::Voting { seed },
        attention_weights: None,
    })
}
