//! Classification metrics and repeated-run statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Convergence tolerance of the incomplete-beta continued fraction.
pub const BETA_CF_TOLERANCE: f64 = 1e-10;
const BETA_CF_MAX_ITER: usize = 500;

/// Fraction of `idx` where `pred` equals `truth`.
pub fn accuracy(pred: &[usize], truth: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().filter(|&&i| pred[i] == truth[i]).count() as f64 / idx.len() as f64
}

/// Unweighted mean of per-class F1 over all `num_classes` classes. A class
/// with no true positives (including one absent from both sides) scores 0.
pub fn macro_f1(pred: &[usize], truth: &[usize], idx: &[usize], num_classes: usize) -> f64 {
    if num_classes == 0 {
        return 0.0;
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for &i in idx {
        let (p, t) = (pred[i], truth[i]);
        if p == t {
            tp[t] += 1;
        } else {
            if p < num_classes {
                fp[p] += 1;
            }
            fn_[t] += 1;
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    total / num_classes as f64
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub half_width: f64,
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_ci(values: &[f64], n_resamples: usize, level: f64, seed: u64) -> Result<ConfidenceInterval> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("bootstrap of an empty sample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    let m = mean(values);
    if values.len() == 1 || n_resamples == 0 {
        return Ok(ConfidenceInterval {
            mean: m,
            lower: m,
            upper: m,
            half_width: 0.0,
        });
    }
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..n_resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_unstable_by(f64::total_cmp);
    let lower = quantile_sorted(&means, (1.0 - level) / 2.0);
    let upper = quantile_sorted(&means, (1.0 + level) / 2.0);
    Ok(ConfidenceInterval {
        mean: m,
        lower,
        upper,
        half_width: ((upper - lower) / 2.0).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_stat: f64,
    pub p_value: f64,
    pub df: f64,
}

/// Two-sided paired t-test on `a - b`.
///
/// Zero-variance differences: all zero gives `t = 0, p = 1`; a constant
/// nonzero difference gives `t = ±∞, p = 0`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "paired samples of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least 2 pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let d_mean = mean(&diffs);
    let var = diffs.iter().map(|d| (d - d_mean) * (d - d_mean)).sum::<f64>() / (n - 1) as f64;
    let df = (n - 1) as f64;
    if var == 0.0 {
        return Ok(if d_mean == 0.0 {
            TTest {
                t_stat: 0.0,
                p_value: 1.0,
                df,
            }
        } else {
            log::warn!("paired t-test: differences are constant and nonzero; reporting p = 0");
            TTest {
                t_stat: d_mean.signum() * f64::INFINITY,
                p_value: 0.0,
                df,
            }
        });
    }
    let t_stat = d_mean / (var / n as f64).sqrt();
    Ok(TTest {
        t_stat,
        p_value: student_t_two_sided_p(t_stat, df),
        df,
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `I_x(a, b)` by Lentz's continued fraction, using the symmetry
/// `I_x(a, b) = 1 - I_{1-x}(b, a)` where it converges faster.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_CF_TOLERANCE {
            break;
        }
    }
    h
}

/// One method's result on one run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub n_runs: usize,
    pub accuracy: ConfidenceInterval,
    pub macro_f1: ConfidenceInterval,
    pub mean_train_seconds: f64,
}

/// Bootstrap summary of the runs of a single method.
pub fn summarize(method: &str, runs: &[RunResult], n_resamples: usize, level: f64, seed: u64) -> Result<MethodSummary> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument(format!("no runs for method `{method}`")));
    }
    let acc: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let f1: Vec<f64> = runs.iter().map(|r| r.macro_f1).collect();
    let secs: Vec<f64> = runs.iter().map(|r| r.train_seconds).collect();
    Ok(MethodSummary {
        method: method.to_string(),
        n_runs: runs.len(),
        accuracy: bootstrap_ci(&acc, n_resamples, level, seed)?,
        macro_f1: bootstrap_ci(&f1, n_resamples, level, seed.wrapping_add(1))?,
        mean_train_seconds: mean(&secs),
    })
}
