use ndarray::{Array2, ArrayView1, ArrayView2};

/// Per-class per-feature variances are floored at this value.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with empirical class priors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    log_prior: Vec<f64>,
    mean: Array2<f64>,
    var: Array2<f64>,
}

impl GaussianNb {
    pub(super) fn fit(x: ArrayView2<'_, f64>, labels: &[usize], num_classes: usize) -> Self {
        let d = x.ncols();
        let mut counts = vec![0usize; num_classes];
        let mut mean = Array2::zeros((num_classes, d));
        for (row, &y) in x.rows().into_iter().zip(labels) {
            counts[y] += 1;
            mean.row_mut(y).scaled_add(1.0, &row);
        }
        for (c, &n) in counts.iter().enumerate() {
            if n > 0 {
                mean.row_mut(c).mapv_inplace(|v| v / n as f64);
            }
        }
        let mut var = Array2::zeros((num_classes, d));
        for (row, &y) in x.rows().into_iter().zip(labels) {
            for j in 0..d {
                let diff = row[j] - mean[[y, j]];
                var[[y, j]] += diff * diff;
            }
        }
        for (c, &n) in counts.iter().enumerate() {
            var.row_mut(c)
                .mapv_inplace(|v: f64| if n > 0 { (v / n as f64).max(VARIANCE_FLOOR) } else { 1.0 });
        }
        let m = labels.len() as f64;
        let log_prior = counts
            .iter()
            .map(|&n| if n > 0 { (n as f64 / m).ln() } else { f64::NEG_INFINITY })
            .collect();
        Self { log_prior, mean, var }
    }

    /// Unnormalized log posterior of each class.
    pub fn joint_log_likelihood(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.log_prior
            .iter()
            .enumerate()
            .map(|(c, &lp)| {
                if lp == f64::NEG_INFINITY {
                    return lp;
                }
                let ll: f64 = x
                    .iter()
                    .zip(self.mean.row(c))
                    .zip(self.var.row(c))
                    .map(|((&xi, &mu), &v)| -0.5 * (ln_2pi + v.ln()) - (xi - mu) * (xi - mu) / (2.0 * v))
                    .sum();
                lp + ll
            })
            .collect()
    }

    pub(super) fn predict_row(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        let jll = self.joint_log_likelihood(x);
        let max = jll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, &l) in out.iter_mut().zip(&jll) {
            *o = (l - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
}
