use serde::{Deserialize, Serialize};

use super::{ModelSpec, Standardizer, TrainingSet};

/// k-nearest neighbours on z-scored inputs with Euclidean distance. Distance
/// ties go to the lower training index; vote ties to the lower label index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Knn {
    pub(crate) fn fit(spec: &ModelSpec, data: &TrainingSet) -> Self {
        let standardizer = Standardizer::fit(&data.rows);
        let points = data.rows.iter().map(|r| standardizer.apply(r)).collect();
        Knn {
            k: spec.k.min(data.n_rows()),
            n_classes: data.n_classes,
            standardizer,
            points,
            labels: data.y.clone(),
        }
    }

    /// Indices of the k nearest training points, nearest first.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let z = self.standardizer.apply(row);
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Vote fractions among the k neighbours.
    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        let nn = self.neighbours(row);
        for &i in &nn {
            votes[self.labels[i]] += 1.0;
        }
        votes.iter().map(|v| v / nn.len() as f64).collect()
    }
}
