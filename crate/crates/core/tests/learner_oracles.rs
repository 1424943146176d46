mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

use common::{
    cart_oracle, knn_oracle, nb_oracle, normal_matrix, oracle_best_split, rng, samme_oracle_train_accuracy, to_rows,
};
use stackgcn::learners::{argmax, fit, ClassifierKind};

struct Dataset {
    x: Array2<f64>,
    labels: Vec<usize>,
    queries: Array2<f64>,
    classes: usize,
}

fn dataset(seed: u64, m: usize, d: usize, classes: usize) -> Dataset {
    let mut r = rng(seed);
    let mut x = normal_matrix(&mut r, m, d);
    let labels: Vec<usize> = (0..m)
        .map(|i| if i < classes { i } else { r.random_range(0..classes) })
        .collect();
    for (i, &y) in labels.iter().enumerate() {
        x[[i, 0]] += y as f64;
    }
    let queries = normal_matrix(&mut r, 15, d);
    Dataset {
        x,
        labels,
        queries,
        classes,
    }
}

fn check(kind: &ClassifierKind, ds: &Dataset, oracle: impl Fn(&[f64]) -> Vec<f64>) {
    let model = fit(kind, ds.x.view(), &ds.labels, ds.classes).unwrap();
    let all = ndarray::concatenate(ndarray::Axis(0), &[ds.x.view(), ds.queries.view()]).unwrap();
    let got = model.predict(all.view()).unwrap();
    for (row, q) in got.rows().into_iter().zip(all.rows()) {
        let want = oracle(q.as_slice().unwrap());
        let row = row.to_vec();
        assert_eq!(argmax(&row), argmax(&want), "{} argmax", kind.name());
        for (a, b) in row.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{}: {row:?} vs {want:?}", kind.name());
        }
    }
}

#[test]
fn knn_matches_exhaustive_neighbor_search() {
    for (seed, k) in [(1, 1), (2, 3), (3, 5), (4, 40)] {
        let ds = dataset(seed, 25, 3, 3);
        let rows = to_rows(ds.x.view());
        check(&ClassifierKind::Knn { k }, &ds, |q| {
            knn_oracle(&rows, &ds.labels, k, ds.classes, q)
        });
    }
}

#[test]
fn knn_on_integer_grid_with_distance_ties() {
    let x = Array2::from_shape_fn((16, 2), |(i, j)| if j == 0 { (i % 4) as f64 } else { (i / 4) as f64 });
    let labels: Vec<usize> = (0..16).map(|i| (i * 7 + 3) % 3).collect();
    let ds = Dataset {
        queries: Array2::from_shape_fn((9, 2), |(i, j)| if j == 0 { 0.5 * i as f64 } else { 1.5 }),
        x,
        labels,
        classes: 3,
    };
    let rows = to_rows(ds.x.view());
    for k in [2, 4, 6] {
        check(&ClassifierKind::Knn { k }, &ds, |q| {
            knn_oracle(&rows, &ds.labels, k, ds.classes, q)
        });
    }
}

#[test]
fn gaussian_nb_matches_explicit_posterior() {
    for seed in 10..14 {
        let ds = dataset(seed, 30, 4, 3);
        let rows = to_rows(ds.x.view());
        check(&ClassifierKind::GaussianNb, &ds, |q| {
            nb_oracle(&rows, &ds.labels, ds.classes, q)
        });
    }
}

#[test]
fn gaussian_nb_with_constant_feature_uses_variance_floor() {
    let mut ds = dataset(15, 20, 3, 2);
    ds.x.column_mut(2).fill(1.0);
    // Off-value queries would add a ~1e9 term equal across classes.
    ds.queries.column_mut(2).fill(1.0);
    let rows = to_rows(ds.x.view());
    check(&ClassifierKind::GaussianNb, &ds, |q| {
        nb_oracle(&rows, &ds.labels, ds.classes, q)
    });
}

#[test]
fn decision_tree_matches_exhaustive_cart() {
    for (seed, max_depth, min_leaf) in [(20, 1, 1), (21, 3, 1), (22, 10, 1), (23, 4, 3), (24, 10, 2)] {
        let ds = dataset(seed, 30, 3, 3);
        let rows = to_rows(ds.x.view());
        let kind = ClassifierKind::DecisionTree { max_depth, min_leaf };
        check(&kind, &ds, |q| {
            cart_oracle(&rows, &ds.labels, ds.classes, max_depth, min_leaf, q)
        });
    }
}

#[test]
fn decision_tree_root_split_is_the_enumerated_optimum() {
    let ds = dataset(30, 24, 4, 2);
    let rows = to_rows(ds.x.view());
    let model = fit(
        &ClassifierKind::DecisionTree {
            max_depth: 1,
            min_leaf: 1,
        },
        ds.x.view(),
        &ds.labels,
        2,
    )
    .unwrap();
    let got = model.as_decision_tree().unwrap().root_split().unwrap();
    let all: Vec<usize> = (0..24).collect();
    let (f, t, gain) = oracle_best_split(&rows, &ds.labels, 2, &all, 1).unwrap();
    assert_eq!(got.feature, f);
    assert!((got.threshold - t).abs() < 1e-12);
    assert!((got.gain - gain).abs() < 1e-12);
}

fn separable_2d(seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let mut x = Array2::zeros((40, 2));
    let mut labels = Vec::new();
    for i in 0..40 {
        let y = i % 2;
        let (a, b) = (r.random_range(-1.0..1.0), r.random_range(0.3..1.5));
        // Class 1 lies above the line x1 = 0.5 x0, class 0 below it.
        let off = if y == 1 { b } else { -b };
        x[[i, 0]] = a;
        x[[i, 1]] = 0.5 * a + off;
        labels.push(y);
    }
    (x, labels)
}

#[test]
fn adaboost_fits_separable_data_in_ten_rounds() {
    for seed in [1, 2, 3] {
        let (x, labels) = separable_2d(seed);
        let oracle = samme_oracle_train_accuracy(&to_rows(x.view()), &labels, 2, 10);
        assert_eq!(oracle, 1.0, "reference SAMME, seed {seed}");
        let model = fit(
            &ClassifierKind::AdaBoost { n_rounds: 10, seed: 0 },
            x.view(),
            &labels,
            2,
        )
        .unwrap();
        let p = model.predict(x.view()).unwrap();
        let acc = p
            .rows()
            .into_iter()
            .zip(&labels)
            .filter(|(r, &y)| argmax(r.as_slice().unwrap()) == y)
            .count();
        assert_eq!(acc, 40, "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tree_and_knn_agree_with_oracles_on_random_data(seed in 0u64..10_000, m in 4usize..30, k in 1usize..8) {
        let ds = dataset(seed, m, 2, 2);
        let rows = to_rows(ds.x.view());
        check(&ClassifierKind::Knn { k }, &ds, |q| knn_oracle(&rows, &ds.labels, k, 2, q));
        check(&ClassifierKind::DecisionTree { max_depth: 10, min_leaf: 1 }, &ds, |q| cart_oracle(&rows, &ds.labels, 2, 10, 1, q));
    }
}
