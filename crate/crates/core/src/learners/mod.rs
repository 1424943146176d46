//! Classical classifiers used as the stacking front-end.
//!
//! Every model is fit on the labelled nodes' feature rows and predicts a
//! class-probability row for every node. Hard learners report empirical
//! frequencies (neighbor vote shares, leaf class frequencies).

mod adaboost;
mod knn;
mod naive_bayes;
mod tree;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adaboost::AdaBoost;
pub use knn::Knn;
pub use naive_bayes::GaussianNb;
pub use tree::{DecisionTree, RandomForest, Split};

pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_MAX_DEPTH: usize = 10;
pub const DEFAULT_MIN_LEAF: usize = 1;
pub const DEFAULT_N_TREES: usize = 100;
pub const DEFAULT_ADABOOST_ROUNDS: usize = 50;

/// A classifier family and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierKind {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    GaussianNb,
    DecisionTree {
        #[serde(default = "default_depth")]
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
    RandomForest {
        #[serde(default = "default_trees")]
        n_trees: usize,
        #[serde(default = "default_depth")]
        max_depth: usize,
        /// Features tried per split; `None` means `⌈√d⌉`.
        #[serde(default)]
        max_features: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
    AdaBoost {
        #[serde(default = "default_rounds")]
        n_rounds: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_k() -> usize {
    DEFAULT_KNN_K
}
fn default_depth() -> usize {
    DEFAULT_MAX_DEPTH
}
fn default_min_leaf() -> usize {
    DEFAULT_MIN_LEAF
}
fn default_trees() -> usize {
    DEFAULT_N_TREES
}
fn default_rounds() -> usize {
    DEFAULT_ADABOOST_ROUNDS
}

/// Registry names accepted by [`ClassifierKind::from_name`].
pub const REGISTRY: &[&str] = &["knn", "random_forest", "gaussian_nb", "decision_tree", "adaboost"];

impl ClassifierKind {
    /// Looks up a classifier by registry name (or a common short alias)
    /// with default hyperparameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "knn" => Self::Knn { k: DEFAULT_KNN_K },
            "random_forest" | "rf" => Self::RandomForest {
                n_trees: DEFAULT_N_TREES,
                max_depth: DEFAULT_MAX_DEPTH,
                max_features: None,
                seed: 0,
            },
            "gaussian_nb" | "nb" | "naive_bayes" => Self::GaussianNb,
            "decision_tree" | "dt" => Self::DecisionTree {
                max_depth: DEFAULT_MAX_DEPTH,
                min_leaf: DEFAULT_MIN_LEAF,
            },
            "adaboost" | "ada" => Self::AdaBoost {
                n_rounds: DEFAULT_ADABOOST_ROUNDS,
                seed: 0,
            },
            _ => {
                return Err(Error::UnknownClassifier {
                    name: name.to_string(),
                    registry: REGISTRY.join(", "),
                })
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Knn { .. } => "knn",
            Self::GaussianNb => "gaussian_nb",
            Self::DecisionTree { .. } => "decision_tree",
            Self::RandomForest { .. } => "random_forest",
            Self::AdaBoost { .. } => "adaboost",
        }
    }

    /// The experiment default: KNN, random forest and Gaussian naive Bayes.
    pub fn default_registry() -> Vec<Self> {
        ["knn", "random_forest", "gaussian_nb"]
            .iter()
            .map(|n| Self::from_name(n).unwrap())
            .collect()
    }

    /// Whether fitting depends on a random seed.
    pub fn is_seeded(&self) -> bool {
        matches!(self, Self::RandomForest { .. })
    }

    /// Same hyperparameters with the seed offset by `run_seed`.
    pub fn reseeded(&self, run_seed: u64) -> Self {
        let mut kind = self.clone();
        match &mut kind {
            Self::RandomForest { seed, .. } | Self::AdaBoost { seed, .. } => *seed = seed.wrapping_add(run_seed),
            _ => {}
        }
        kind
    }

    fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidArgument(format!("{}: {what} must be >= 1", self.name())))
            } else {
                Ok(())
            }
        };
        match *self {
            Self::Knn { k } => positive("k", k),
            Self::GaussianNb => Ok(()),
            Self::DecisionTree { max_depth, min_leaf } => {
                positive("max_depth", max_depth)?;
                positive("min_leaf", min_leaf)
            }
            Self::RandomForest {
                n_trees,
                max_depth,
                max_features,
                ..
            } => {
                positive("n_trees", n_trees)?;
                positive("max_depth", max_depth)?;
                positive("max_features", max_features.unwrap_or(1))
            }
            Self::AdaBoost { n_rounds, .. } => positive("n_rounds", n_rounds),
        }
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    kind: ClassifierKind,
    num_classes: usize,
    feature_dim: usize,
    fitted: Fitted,
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Knn(Knn),
    GaussianNb(GaussianNb),
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    AdaBoost(AdaBoost),
}

/// Fits `kind` on `m` labelled rows.
pub fn fit(
    kind: &ClassifierKind,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
) -> Result<ClassifierModel> {
    kind.validate()?;
    let m = features.nrows();
    if m < 1 {
        return Err(Error::InvalidArgument("cannot fit on zero samples".into()));
    }
    if labels.len() != m {
        return Err(Error::Shape(format!("{} labels for {m} rows", labels.len())));
    }
    if num_classes < 1 {
        return Err(Error::InvalidArgument("num_classes must be >= 1".into()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::InvalidArgument(format!("label {l} outside [0, {num_classes})")));
    }
    let fitted = match *kind {
        ClassifierKind::Knn { k } => Fitted::Knn(Knn::fit(features, labels, num_classes, k)),
        ClassifierKind::GaussianNb => Fitted::GaussianNb(GaussianNb::fit(features, labels, num_classes)),
        ClassifierKind::DecisionTree { max_depth, min_leaf } => {
            Fitted::DecisionTree(DecisionTree::fit(features, labels, num_classes, max_depth, min_leaf))
        }
        ClassifierKind::RandomForest {
            n_trees,
            max_depth,
            max_features,
            seed,
        } => Fitted::RandomForest(RandomForest::fit(
            features,
            labels,
            num_classes,
            n_trees,
            max_depth,
            max_features,
            seed,
        )),
        ClassifierKind::AdaBoost { n_rounds, .. } => {
            Fitted::AdaBoost(AdaBoost::fit(features, labels, num_classes, n_rounds))
        }
    };
    Ok(ClassifierModel {
        kind: kind.clone(),
        num_classes,
        feature_dim: features.ncols(),
        fitted,
    })
}

impl ClassifierModel {
    pub fn kind(&self) -> &ClassifierKind {
        &self.kind
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Class-probability rows (`N × K`) for every input row.
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.feature_dim {
            return Err(Error::Shape(format!(
                "model was fit on {} features, got {}",
                self.feature_dim,
                features.ncols()
            )));
        }
        let mut out = Array2::zeros((features.nrows(), self.num_classes));
        for (x, mut row) in features.rows().into_iter().zip(out.rows_mut()) {
            let dst = row.as_slice_mut().expect("standard layout");
            match &self.fitted {
                Fitted::Knn(m) => m.predict_row(x, dst),
                Fitted::GaussianNb(m) => m.predict_row(x, dst),
                Fitted::DecisionTree(m) => m.predict_row(x, dst),
                Fitted::RandomForest(m) => m.predict_row(x, dst),
                Fitted::AdaBoost(m) => m.predict_row(x, dst),
            }
        }
        Ok(out)
    }

    pub fn as_decision_tree(&self) -> Option<&DecisionTree> {
        match &self.fitted {
            Fitted::DecisionTree(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_adaboost(&self) -> Option<&AdaBoost> {
        match &self.fitted {
            Fitted::AdaBoost(a) => Some(a),
            _ => None,
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn all_kinds() -> Vec<ClassifierKind> {
        vec![
            ClassifierKind::Knn { k: 3 },
            ClassifierKind::GaussianNb,
            ClassifierKind::DecisionTree {
                max_depth: 4,
                min_leaf: 1,
            },
            ClassifierKind::RandomForest {
                n_trees: 7,
                max_depth: 4,
                max_features: None,
                seed: 3,
            },
            ClassifierKind::AdaBoost { n_rounds: 5, seed: 0 },
        ]
    }

    #[test]
    fn registry_round_trip_and_unknown_name() {
        for name in REGISTRY {
            assert_eq!(ClassifierKind::from_name(name).unwrap().name(), *name);
        }
        let err = ClassifierKind::from_name("svc").unwrap_err();
        assert!(err.to_string().contains("knn, random_forest"), "{err}");
    }

    #[test]
    fn kind_parses_from_toml_with_defaults() {
        #[derive(Deserialize)]
        struct W {
            c: Vec<ClassifierKind>,
        }
        let w: W = toml::from_str(
            r#"c = [{ kind = "knn" }, { kind = "random_forest", n_trees = 3 }, { kind = "gaussian_nb" }]"#,
        )
        .unwrap();
        assert_eq!(w.c[0], ClassifierKind::Knn { k: 5 });
        assert!(matches!(
            w.c[1],
            ClassifierKind::RandomForest {
                n_trees: 3,
                seed: 0,
                ..
            }
        ));
    }

    #[test]
    fn fit_errors() {
        let x = Array2::<f64>::zeros((0, 2));
        assert!(fit(&ClassifierKind::GaussianNb, x.view(), &[], 2).is_err());
        let x = array![[0.0], [1.0]];
        assert!(fit(&ClassifierKind::GaussianNb, x.view(), &[0, 2], 2).is_err());
        assert!(fit(&ClassifierKind::Knn { k: 0 }, x.view(), &[0, 1], 2).is_err());
    }

    #[test]
    fn predict_rejects_dimension_mismatch() {
        let x = array![[0.0, 1.0], [1.0, 0.0]];
        for kind in all_kinds() {
            let m = fit(&kind, x.view(), &[0, 1], 2).unwrap();
            assert!(matches!(m.predict(array![[1.0]].view()), Err(Error::Shape(_))));
        }
    }

    #[test]
    fn constant_features_do_not_error() {
        let x = Array2::from_elem((6, 3), 2.5);
        let y = [0, 1, 2, 0, 1, 2];
        for kind in all_kinds() {
            let m = fit(&kind, x.view(), &y, 3).unwrap();
            let p = m.predict(x.view()).unwrap();
            assert!(p.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn forest_with_unanimous_trees_is_one_hot() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]];
        let kind = ClassifierKind::RandomForest {
            n_trees: 5,
            max_depth: 3,
            max_features: None,
            seed: 1,
        };
        let m = fit(&kind, x.view(), &[2, 2, 2], 3).unwrap();
        let p = m.predict(array![[3.0, -1.0]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn argmax_ties_to_lowest_index() {
        assert_eq!(argmax(&[0.0, 5.0, 0.0]), 1);
        assert_eq!(argmax(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    fn dataset() -> impl Strategy<Value = (Array2<f64>, Vec<usize>, Array2<f64>)> {
        (2usize..25, 1usize..4).prop_flat_map(|(m, d)| {
            (
                proptest::collection::vec(-2.0f64..2.0, m * d),
                proptest::collection::vec(0usize..3, m),
                proptest::collection::vec(-3.0f64..3.0, 5 * d),
            )
                .prop_map(move |(xs, ys, qs)| {
                    (
                        Array2::from_shape_vec((m, d), xs).unwrap(),
                        ys,
                        Array2::from_shape_vec((5, d), qs).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn predictions_are_probability_rows_and_deterministic((x, y, q) in dataset()) {
            for kind in all_kinds() {
                let a = fit(&kind, x.view(), &y, 3).unwrap();
                let b = fit(&kind, x.view(), &y, 3).unwrap();
                prop_assert_eq!(&a, &b);
                let p = a.predict(q.view()).unwrap();
                prop_assert_eq!(&p, &b.predict(q.view()).unwrap());
                for row in p.rows() {
                    prop_assert!(row.iter().all(|&v| v >= 0.0));
                    prop_assert!((row.sum() - 1.0).abs() <= 1e-9, "{:?} row {:?}", kind, row);
                }
            }
        }
    }
}
