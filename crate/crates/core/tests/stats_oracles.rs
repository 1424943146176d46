mod common;

use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use common::{binomial_bootstrap_half_width, rng};
use stackgcn::stats::{bootstrap_ci, paired_t_test, student_t_two_sided_p};

fn statrs_two_sided(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    2.0 * (1.0 - dist.cdf(t.abs()))
}

#[test]
fn paired_t_test_on_one_to_five() {
    let a = [1.0, 2.0, 3.0, 4.0, 5.0];
    let t = paired_t_test(&a, &[0.0; 5]).unwrap();
    assert!((t.t_stat - 4.2426).abs() < 1e-3);
    assert!((t.p_value - 0.0132).abs() < 1e-3);
    assert!((t.p_value - statrs_two_sided(t.t_stat, 4.0)).abs() < 1e-9);
    assert_eq!(t.df, 4.0);
}

#[test]
fn t_distribution_tail_matches_statrs() {
    for df in [1.0, 2.0, 3.5, 9.0, 29.0, 200.0] {
        for t in [0.0, 0.1, 0.7, 1.5, 2.0, 3.3, 6.0, 12.0] {
            let ours = student_t_two_sided_p(t, df);
            let theirs = statrs_two_sided(t, df);
            assert!((ours - theirs).abs() < 1e-9, "t={t} df={df}: {ours} vs {theirs}");
        }
    }
}

#[test]
fn bootstrap_half_width_of_balanced_binary_sample() {
    let values: Vec<f64> = (0..30).map(|i| if i < 15 { 0.0 } else { 1.0 }).collect();
    let ci = bootstrap_ci(&values, 10_000, 0.95, 7).unwrap();
    let oracle = binomial_bootstrap_half_width(15, 15, 0.95);
    assert!((oracle - 1.0 / 6.0).abs() < 1e-12);
    assert!((ci.half_width - oracle).abs() < 0.02, "{} vs {oracle}", ci.half_width);
    assert_eq!(ci.mean, 0.5);
}

#[test]
fn bootstrap_ci_contains_sample_mean() {
    let mut r = rng(99);
    for trial in 0..100 {
        let n = r.random_range(2..40);
        let values: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let ci = bootstrap_ci(&values, 2000, 0.95, trial).unwrap();
        assert!(ci.lower <= ci.mean && ci.mean <= ci.upper, "trial {trial}: {ci:?}");
    }
}

proptest! {
    #[test]
    fn paired_t_matches_statrs_on_random_pairs(seed in 0u64..100_000, n in 3usize..30) {
        let mut r = rng(seed);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let t = paired_t_test(&a, &b).unwrap();
        prop_assert!((t.p_value - statrs_two_sided(t.t_stat, (n - 1) as f64)).abs() < 1e-8);
    }
}
