use serde::{Deserialize, Serialize};

use super::tree::softmax;
use super::TrainingSet;

/// Gaussian naive Bayes. Every variance is inflated by `1e-9` times the
/// largest per-feature variance of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub priors: Vec<f64>,
    /// `means[c][j]`
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub epsilon: f64,
}

const VAR_SMOOTHING: f64 = 1e-9;

fn population_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

impl GaussianNb {
    pub(crate) fn fit(data: &TrainingSet) -> Self {
        let (k, d, n) = (data.n_classes, data.n_features(), data.n_rows());
        let max_var = data
            .cols
            .iter()
            .map(|c| population_var(c.iter().copied()).1)
            .fold(0.0, f64::max);
        let epsilon = VAR_SMOOTHING * max_var;
        let mut priors = vec![0.0; k];
        let mut means = vec![vec![0.0; d]; k];
        let mut variances = vec![vec![0.0; d]; k];
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| data.y[i] == c).collect();
            priors[c] = members.len() as f64 / n as f64;
            for j in 0..d {
                let (m, v) = population_var(members.iter().map(|&i| data.cols[j][i]));
                means[c][j] = m;
                variances[c][j] = v + epsilon;
            }
        }
        GaussianNb {
            priors,
            means,
            variances,
            epsilon,
        }
    }

    /// Per-class joint log-likelihood `ln P(c) + sum_j ln N(x_j; mu, var)`.
    pub fn log_joint(&self, row: &[f64]) -> Vec<f64> {
        (0..self.priors.len())
            .map(|c| {
                let mut s = self.priors[c].ln();
                for (j, &x) in row.iter().enumerate() {
                    let v = self.variances[c][j];
                    let diff = x - self.means[c][j];
                    s -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + diff * diff / v);
                }
                s
            })
            .collect()
    }

    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.log_joint(row))
    }
}

#[cfg(test)]
mod tests {
    use crate::models::test_data::blobs;
    use crate::models::{train, ModelKind, ModelSpec, ModelParams};

    /// Likelihood-ratio rule for two unit-variance isotropic Gaussians with
    /// equal priors: pick the nearer mean.
    fn bayes_rule(x: &[f64]) -> &'static str {
        let d0: f64 = x.iter().map(|v| (v + 3.0).powi(2)).sum();
        let d1: f64 = x.iter().map(|v| (v - 3.0).powi(2)).sum();
        if d0 <= d1 {
            "c0"
        } else {
            "c1"
        }
    }

    #[test]
    fn two_blobs_are_separated() {
        let train_set = blobs(&[vec![-3.0, -3.0], vec![3.0, 3.0]], 1.0, 1000, 21);
        let test_set = blobs(&[vec![-3.0, -3.0], vec![3.0, 3.0]], 1.0, 1000, 22);
        let model = train(&ModelSpec::new(ModelKind::NB), &train_set).unwrap();
        let pred = model.predict(test_set.rows()).unwrap();
        let truth = test_set.labels().unwrap();
        let acc = pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
        assert!(acc >= 0.99, "{acc}");
        let oracle = test_set.rows().iter().zip(truth).filter(|(r, t)| bayes_rule(r) == t.as_str()).count() as f64
            / truth.len() as f64;
        assert!((acc - oracle).abs() < 0.005, "{acc} vs oracle {oracle}");
    }

    #[test]
    fn parameters_are_class_moments() {
        let m = blobs(&[vec![0.0], vec![5.0]], 1.0, 300, 2);
        let model = train(&ModelSpec::new(ModelKind::NB), &m).unwrap();
        let ModelParams::NaiveBayes(nb) = &model.params else { panic!() };
        assert_eq!(nb.priors, vec![0.5, 0.5]);
        assert!((nb.means[1][0] - 5.0).abs() < 0.2);
        assert!((nb.variances[0][0] - 1.0).abs() < 0.2);
        assert!(nb.epsilon > 0.0 && nb.epsilon < 1e-7);
    }
}
