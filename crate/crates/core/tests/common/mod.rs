//! Independent reference implementations shared by the integration tests
//! and the acceptance suite. Nothing here calls into the code it checks
//! beyond constructing inputs.

#![allow(dead_code, clippy::needless_range_loop)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use stackgcn::gcn::{loss_and_grads, GcnModel};
use stackgcn::{Graph, NormalizedAdjacency};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Erdős–Rényi graph with Gaussian features and uniform labels.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize, p: f64) -> Graph {
    let x = normal_matrix(rng, n, d);
    let labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(x, labels, k, edges).unwrap()
}

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` built densely from the edge list.
pub fn dense_normalized(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    a
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| (0..cols).map(|c| (0..inner).map(|t| row[t] * b[t][c]).sum()).collect())
        .collect()
}

pub fn to_rows(m: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Straight-line `Â ReLU(… ReLU(Â X W0) …) W_{L-1}` with nested loops.
pub fn reference_forward(a: &[Vec<f64>], x: &[Vec<f64>], weights: &[Array2<f64>]) -> Vec<Vec<f64>> {
    let mut h = x.to_vec();
    for (l, w) in weights.iter().enumerate() {
        let z = matmul(a, &matmul(&h, &to_rows(w.view())));
        h = if l + 1 < weights.len() {
            z.into_iter()
                .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
                .collect()
        } else {
            z
        };
    }
    h
}

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|)` over every
/// weight entry, using central differences of step `eps`. Entries where
/// both sides vanish count as exact.
pub fn finite_difference_max_rel_error(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    mask: &[usize],
    eps: f64,
) -> f64 {
    let (_, grads) = loss_and_grads(model, adj, x, labels, mask).unwrap();
    let mut probe = model.clone();
    let mut worst = 0.0_f64;
    for (l, g) in grads.iter().enumerate() {
        for ((r, c), &analytic) in g.indexed_iter() {
            let orig = probe.weights()[l][[r, c]];
            probe.weights_mut()[l][[r, c]] = orig + eps;
            let (plus, _) = loss_and_grads(&probe, adj, x, labels, mask).unwrap();
            probe.weights_mut()[l][[r, c]] = orig - eps;
            let (minus, _) = loss_and_grads(&probe, adj, x, labels, mask).unwrap();
            probe.weights_mut()[l][[r, c]] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let scale = analytic.abs().max(numeric.abs());
            if scale > 0.0 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    worst
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// KNN vote shares: sort all training points by (distance, index).
pub fn knn_oracle(train: &[Vec<f64>], labels: &[usize], k: usize, classes: usize, q: &[f64]) -> Vec<f64> {
    let mut order: Vec<(f64, usize)> = train.iter().enumerate().map(|(i, t)| (sq_dist(t, q), i)).collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let take = k.min(train.len());
    let mut out = vec![0.0; classes];
    for &(_, i) in &order[..take] {
        out[labels[i]] += 1.0 / take as f64;
    }
    out
}

/// Gaussian NB posterior computed from explicit per-class sums.
pub fn nb_oracle(train: &[Vec<f64>], labels: &[usize], classes: usize, q: &[f64]) -> Vec<f64> {
    let d = q.len();
    let mut log_post = vec![f64::NEG_INFINITY; classes];
    for (c, lp) in log_post.iter_mut().enumerate() {
        let members: Vec<&Vec<f64>> = train
            .iter()
            .zip(labels)
            .filter(|(_, &y)| y == c)
            .map(|(t, _)| t)
            .collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let mut total = (n / train.len() as f64).ln();
        for j in 0..d {
            let mu = members.iter().map(|m| m[j]).sum::<f64>() / n;
            let var = (members.iter().map(|m| (m[j] - mu).powi(2)).sum::<f64>() / n).max(1e-9);
            total += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (q[j] - mu).powi(2) / (2.0 * var);
        }
        *lp = total;
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|u| u / z).collect()
}

fn gini_of(rows: &[usize], labels: &[usize], classes: usize) -> f64 {
    let mut counts = vec![0.0; classes];
    for &r in rows {
        counts[labels[r]] += 1.0;
    }
    let n = rows.len() as f64;
    1.0 - counts.iter().map(|c| (c / n).powi(2)).sum::<f64>()
}

/// Exhaustive best split over every feature and every midpoint between
/// adjacent distinct values; earlier candidates win ties.
pub fn oracle_best_split(
    x: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    rows: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let parent = gini_of(rows, labels, classes);
    let n = rows.len() as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= t);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let gain = parent
                - l.len() as f64 / n * gini_of(&l, labels, classes)
                - r.len() as f64 / n * gini_of(&r, labels, classes);
            if best.is_none_or(|(_, _, g)| gain > g + 1e-12) {
                best = Some((f, t, gain));
            }
        }
    }
    best
}

/// CART leaf distribution for `q`, growing only the path `q` follows.
pub fn cart_oracle(
    x: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    max_depth: usize,
    min_leaf: usize,
    q: &[f64],
) -> Vec<f64> {
    let mut rows: Vec<usize> = (0..x.len()).collect();
    let mut depth = 0;
    loop {
        let pure = gini_of(&rows, labels, classes) == 0.0;
        let split = if depth < max_depth && rows.len() >= 2 * min_leaf && !pure {
            oracle_best_split(x, labels, classes, &rows, min_leaf)
        } else {
            None
        };
        match split {
            Some((f, t, _)) => {
                rows.retain(|&r| (x[r][f] <= t) == (q[f] <= t));
                depth += 1;
            }
            None => {
                let mut dist = vec![0.0; classes];
                for &r in &rows {
                    dist[labels[r]] += 1.0 / rows.len() as f64;
                }
                return dist;
            }
        }
    }
}

/// Reference multi-class SAMME over exhaustively enumerated weighted
/// stumps. Returns the training accuracy after `rounds` rounds.
pub fn samme_oracle_train_accuracy(x: &[Vec<f64>], labels: &[usize], classes: usize, rounds: usize) -> f64 {
    let m = x.len();
    let mut w = vec![1.0 / m as f64; m];
    // (feature, threshold, left class, right class, alpha)
    let mut stumps: Vec<(usize, f64, usize, usize, f64)> = Vec::new();
    let cls = |ws: &[f64], side: &[usize]| -> usize {
        let mut acc = vec![0.0; classes];
        for &i in side {
            acc[labels[i]] += ws[i];
        }
        (0..classes).fold(0, |b, c| if acc[c] > acc[b] { c } else { b })
    };
    for _ in 0..rounds {
        let mut best: Option<(f64, usize, f64, usize, usize)> = None;
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for win in vals.windows(2) {
                let t = (win[0] + win[1]) / 2.0;
                let (l, r): (Vec<usize>, Vec<usize>) = (0..m).partition(|&i| x[i][f] <= t);
                let (cl, cr) = (cls(&w, &l), cls(&w, &r));
                let err: f64 = (0..m)
                    .filter(|&i| labels[i] != if x[i][f] <= t { cl } else { cr })
                    .map(|i| w[i])
                    .sum();
                if best.is_none_or(|b| err < b.0 - 1e-12) {
                    best = Some((err, f, t, cl, cr));
                }
            }
        }
        let Some((err, f, t, cl, cr)) = best else { break };
        let err = err.max(1e-10);
        let alpha = ((1.0 - err) / err).ln() + ((classes - 1) as f64).ln();
        stumps.push((f, t, cl, cr, alpha));
        for i in 0..m {
            let pred = if x[i][f] <= t { cl } else { cr };
            if pred != labels[i] {
                w[i] *= alpha.exp();
            }
        }
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= z);
        if err <= 1e-10 {
            break;
        }
    }
    let correct = (0..m)
        .filter(|&i| {
            let mut score = vec![0.0; classes];
            for &(f, t, cl, cr, a) in &stumps {
                score[if x[i][f] <= t { cl } else { cr }] += a;
            }
            let pred = (0..classes).fold(0, |b, c| if score[c] > score[b] { c } else { b });
            pred == labels[i]
        })
        .count();
    correct as f64 / m as f64
}

/// Two-sided percentile interval of the bootstrap mean of `ones` ones and
/// `zeros` zeros, from the exact binomial distribution of the resample.
pub fn binomial_bootstrap_half_width(ones: usize, zeros: usize, level: f64) -> f64 {
    let n = ones + zeros;
    let p = ones as f64 / n as f64;
    let ln_choose = |k: usize| -> f64 {
        (1..=n).map(|i| (i as f64).ln()).sum::<f64>()
            - (1..=k).map(|i| (i as f64).ln()).sum::<f64>()
            - (1..=n - k).map(|i| (i as f64).ln()).sum::<f64>()
    };
    let pmf: Vec<f64> = (0..=n)
        .map(|k| (ln_choose(k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp())
        .collect();
    let quantile = |u: f64| -> f64 {
        let mut c = 0.0;
        for (k, pk) in pmf.iter().enumerate() {
            c += pk;
            if c >= u {
                return k as f64 / n as f64;
            }
        }
        1.0
    };
    (quantile((1.0 + level) / 2.0) - quantile((1.0 - level) / 2.0)) / 2.0
}
