//! The eight supervised classifiers.
//!
//! Tree-based kinds (DT, RF, ET, AB, XGB) share one [`TreeEnsemble`]
//! representation, which the tree explainer walks directly. NB, LR and kNN
//! keep their own parameter sets.

mod adaboost;
mod bayes;
mod boost;
mod forest;
mod knn;
mod logistic;
mod persist;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sample_std, FeatureMatrix};

pub use bayes::GaussianNb;
pub use knn::Knn;
pub use logistic::Logistic;
pub use persist::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use tree::{argmax, softmax, EnsembleOutput, Node, Tree, TreeEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    DT,
    #[serde(rename = "kNN")]
    Knn,
    NB,
    LR,
    RF,
    XGB,
    ET,
    AB,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::DT,
        ModelKind::Knn,
        ModelKind::NB,
        ModelKind::LR,
        ModelKind::RF,
        ModelKind::XGB,
        ModelKind::ET,
        ModelKind::AB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::DT => "DT",
            ModelKind::Knn => "kNN",
            ModelKind::NB => "NB",
            ModelKind::LR => "LR",
            ModelKind::RF => "RF",
            ModelKind::XGB => "XGB",
            ModelKind::ET => "ET",
            ModelKind::AB => "AB",
        }
    }

    pub fn is_tree_based(self) -> bool {
        matches!(self, ModelKind::DT | ModelKind::RF | ModelKind::ET | ModelKind::AB | ModelKind::XGB)
    }

    /// Boosted kinds are explained on their raw margins, the rest on probabilities.
    pub fn explains_margins(self) -> bool {
        matches!(self, ModelKind::XGB | ModelKind::AB)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown model kind `{s}` (expected one of DT, kNN, NB, LR, RF, XGB, ET, AB)")))
    }
}

/// Model kind plus hyperparameters. Fields a kind does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub max_depth: usize,
    pub n_estimators: usize,
    pub k: usize,
    pub max_iterations: usize,
    pub learning_rate: f64,
    /// L2 penalty: leaf-weight λ for XGB, weight decay for LR.
    pub l2: f64,
    /// XGB: minimum hessian sum per child.
    pub min_child_weight: f64,
    pub seed: u64,
}

impl ModelSpec {
    /// Tuned defaults for each kind.
    pub fn new(kind: ModelKind) -> Self {
        let (max_depth, n_estimators) = match kind {
            ModelKind::DT => (30, 1),
            ModelKind::RF => (30, 300),
            ModelKind::XGB => (30, 200),
            ModelKind::ET => (50, 300),
            ModelKind::AB => (30, 100),
            ModelKind::Knn | ModelKind::NB | ModelKind::LR => (0, 0),
        };
        ModelSpec {
            kind,
            max_depth,
            n_estimators,
            k: if kind == ModelKind::Knn { 8 } else { 0 },
            max_iterations: if kind == ModelKind::LR { 1000 } else { 0 },
            learning_rate: match kind {
                ModelKind::XGB => 0.3,
                ModelKind::AB => 1.0,
                _ => 0.0,
            },
            l2: match kind {
                ModelKind::XGB => 1.0,
                ModelKind::LR => 1e-4,
                _ => 0.0,
            },
            min_child_weight: if kind == ModelKind::XGB { 1.0 } else { 0.0 },
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_estimators(mut self, n: usize) -> Self {
        self.n_estimators = n;
        self
    }

    pub fn with_depth(mut self, d: usize) -> Self {
        self.max_depth = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.kind;
        if k.is_tree_based() && self.max_depth == 0 {
            return Err(Error::invalid(format!("{k}: max_depth must be positive")));
        }
        if matches!(k, ModelKind::RF | ModelKind::ET | ModelKind::AB | ModelKind::XGB) && self.n_estimators == 0 {
            return Err(Error::invalid(format!("{k}: n_estimators must be positive")));
        }
        if k == ModelKind::Knn && self.k == 0 {
            return Err(Error::invalid("kNN: k must be positive"));
        }
        if k == ModelKind::LR && self.max_iterations == 0 {
            return Err(Error::invalid("LR: max_iterations must be positive"));
        }
        if matches!(k, ModelKind::XGB | ModelKind::AB) && !(self.learning_rate > 0.0) {
            return Err(Error::invalid(format!("{k}: learning_rate must be positive")));
        }
        if !(self.l2 >= 0.0) || !(self.min_child_weight >= 0.0) {
            return Err(Error::invalid(format!("{k}: l2 and min_child_weight must be non-negative")));
        }
        Ok(())
    }
}

/// Per-feature centering and scaling (sample std; constant features get 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            mean[j] = col.iter().sum::<f64>() / n;
            let s = sample_std(&col);
            if s > 0.0 {
                scale[j] = s;
            }
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    Trees(TreeEnsemble),
    NaiveBayes(GaussianNb),
    Logistic(Logistic),
    Knn(Knn),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    /// Training feature names, in the column order the model expects.
    pub feature_names: Vec<String>,
    /// Label alphabet; score index `i` belongs to `labels[i]`.
    pub labels: Vec<String>,
    pub params: ModelParams,
}

/// Training data in the shapes the learners need.
pub(crate) struct TrainingSet {
    pub rows: Vec<Vec<f64>>,
    pub cols: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub n_classes: usize,
}

impl TrainingSet {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }

    pub fn columns(&self) -> tree::Columns<'_> {
        tree::Columns {
            cols: &self.cols,
            n_rows: self.rows.len(),
        }
    }
}

/// Trains on the active columns of a labeled matrix; the label alphabet is the
/// sorted set of distinct labels.
pub fn train(spec: &ModelSpec, m: &FeatureMatrix) -> Result<TrainedModel> {
    let alphabet = m.require_labels().map(|_| m.label_alphabet())?;
    train_with_labels(spec, m, &alphabet)
}

/// Trains with a fixed label alphabet; every label must have training rows.
pub fn train_with_labels(spec: &ModelSpec, m: &FeatureMatrix, alphabet: &[String]) -> Result<TrainedModel> {
    spec.validate()?;
    let active = m.project_active();
    let labels = active.require_labels()?;
    if active.n_rows() == 0 {
        return Err(Error::invalid("no training rows"));
    }
    if active.n_cols() == 0 {
        return Err(Error::invalid("no active features"));
    }
    if alphabet.len() < 2 {
        return Err(Error::invalid("training needs at least 2 classes"));
    }
    active.check_finite()?;
    let y = labels
        .iter()
        .map(|l| {
            alphabet
                .iter()
                .position(|a| a == l)
                .ok_or_else(|| Error::UnknownLabel(l.clone()))
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut seen = vec![false; alphabet.len()];
    y.iter().for_each(|&c| seen[c] = true);
    if let Some(c) = seen.iter().position(|s| !s) {
        return Err(Error::EmptyClass(alphabet[c].clone()));
    }
    let rows = active.rows().to_vec();
    let cols = (0..active.n_cols()).map(|j| active.column(j)).collect();
    let data = TrainingSet {
        rows,
        cols,
        y,
        n_classes: alphabet.len(),
    };
    let params = match spec.kind {
        ModelKind::DT => ModelParams::Trees(forest::train_dt(spec, &data)),
        ModelKind::RF => ModelParams::Trees(forest::train_rf(spec, &data)),
        ModelKind::ET => ModelParams::Trees(forest::train_et(spec, &data)),
        ModelKind::AB => ModelParams::Trees(adaboost::train_ab(spec, &data)),
        ModelKind::XGB => ModelParams::Trees(boost::train_xgb(spec, &data)),
        ModelKind::NB => ModelParams::NaiveBayes(GaussianNb::fit(&data)),
        ModelKind::LR => ModelParams::Logistic(Logistic::fit(spec, &data)),
        ModelKind::Knn => ModelParams::Knn(Knn::fit(spec, &data)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_names: active.names().to_vec(),
        labels: alphabet.to_vec(),
        params,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn trees(&self) -> Option<&TreeEnsemble> {
        match &self.params {
            ModelParams::Trees(t) => Some(t),
            _ => None,
        }
    }

    fn check_width(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::WidthMismatch {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        Ok(())
    }

    /// Class probabilities for one row. The caller guarantees the width.
    pub fn probabilities(&self, row: &[f64]) -> Vec<f64> {
        match &self.params {
            ModelParams::Trees(t) => t.probabilities(row),
            ModelParams::NaiveBayes(m) => m.probabilities(row),
            ModelParams::Logistic(m) => m.probabilities(row),
            ModelParams::Knn(m) => m.probabilities(row),
        }
    }

    /// Raw per-class margins for boosted kinds.
    pub fn margins(&self, row: &[f64]) -> Option<Vec<f64>> {
        match &self.params {
            ModelParams::Trees(t) if t.output != EnsembleOutput::Probability => Some(t.scores(row)),
            _ => None,
        }
    }

    /// The quantity attributions decompose: the margin for boosted kinds,
    /// the probability otherwise.
    pub fn explained_output(&self, row: &[f64], class: usize) -> f64 {
        match &self.params {
            // for vote and probability ensembles the score is the probability
            ModelParams::Trees(t) => t.score(row, class),
            _ => self.probabilities(row)[class],
        }
    }

    pub fn predict_index(&self, row: &[f64]) -> usize {
        argmax(&self.probabilities(row))
    }

    pub fn predict_scores(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|r| {
                self.check_width(r)?;
                Ok(self.probabilities(r))
            })
            .collect()
    }

    pub fn predict_margins(&self, rows: &[Vec<f64>]) -> Result<Option<Vec<Vec<f64>>>> {
        if self.margins(&vec![0.0; self.n_features()]).is_none() {
            return Ok(None);
        }
        rows.iter()
            .map(|r| {
                self.check_width(r)?;
                Ok(self.margins(r).unwrap_or_default())
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<String>> {
        rows.iter()
            .map(|r| {
                self.check_width(r)?;
                Ok(self.labels[self.predict_index(r)].clone())
            })
            .collect()
    }

    /// Selects the model's feature columns from `m` by name, then predicts.
    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<String>> {
        let sel = m.select_columns(&self.feature_names)?;
        self.predict(sel.rows())
    }

    /// `m` restricted to the model's features, in model order.
    pub fn align(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        m.select_columns(&self.feature_names)
    }
}

#[cfg(test)]
pub(crate) mod test_data {
    use rand_distr::{Distribution, Normal};

    use crate::features::FeatureMatrix;
    use crate::rng;

    /// Isotropic Gaussian blobs, one per center, `n` rows each.
    pub fn blobs(centers: &[Vec<f64>], sigma: f64, n: usize, seed: u64) -> FeatureMatrix {
        let mut r = rng::rng(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let d = centers[0].len();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            for (c, center) in centers.iter().enumerate() {
                rows.push((0..d).map(|j| center[j] + noise.sample(&mut r)).collect());
                labels.push(format!("c{c}"));
            }
        }
        let names = (0..d).map(|j| format!("x{j}")).collect();
        FeatureMatrix::new(names, rows, Some(labels)).unwrap()
    }
}
