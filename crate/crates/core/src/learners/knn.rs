use ndarray::{Array2, ArrayView1, ArrayView2};

/// k-nearest neighbors under Euclidean distance. Distance ties go to the
/// lower training index.
#[derive(Debug, Clone, PartialEq)]
pub struct Knn {
    train: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    k: usize,
}

impl Knn {
    pub(super) fn fit(x: ArrayView2<'_, f64>, labels: &[usize], num_classes: usize, k: usize) -> Self {
        Self {
            train: x.to_owned(),
            labels: labels.to_vec(),
            num_classes,
            k,
        }
    }

    /// Training indices of the `k` nearest neighbors of `x`, nearest first.
    pub fn neighbors(&self, x: ArrayView1<'_, f64>) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .train
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let d2: f64 = t.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        dist.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist.truncate(k);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub(super) fn predict_row(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_classes);
        let nbrs = self.neighbors(x);
        let share = 1.0 / nbrs.len() as f64;
        for i in nbrs {
            out[self.labels[i]] += share;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{fit, ClassifierKind};
    use ndarray::array;

    #[test]
    fn one_nn_on_training_point_is_certain() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]];
        let m = fit(&ClassifierKind::Knn { k: 1 }, x.view(), &[0, 1, 2], 3).unwrap();
        let p = m.predict(array![[1.0, 1.0]].view()).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn three_nn_vote_shares() {
        let x = array![[0.0], [0.1], [0.2], [5.0]];
        let m = fit(&ClassifierKind::Knn { k: 3 }, x.view(), &[0, 0, 1, 1], 2).unwrap();
        let p = m.predict(array![[0.05]].view()).unwrap();
        assert!((p[[0, 0]] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[[0, 1]] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k_larger_than_training_set_uses_all_points() {
        let x = array![[0.0], [1.0]];
        let m = fit(&ClassifierKind::Knn { k: 5 }, x.view(), &[0, 1], 2).unwrap();
        assert_eq!(m.predict(array![[0.0]].view()).unwrap().row(0).to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        let x = array![[-1.0], [1.0]];
        let m = fit(&ClassifierKind::Knn { k: 1 }, x.view(), &[1, 0], 2).unwrap();
        assert_eq!(m.predict(array![[0.0]].view()).unwrap().row(0).to_vec(), vec![0.0, 1.0]);
    }
}
