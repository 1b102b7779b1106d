use std::collections::BTreeSet;

use super::compute::FeatureVector;
use super::names::{red_listed, FEATURE_NAMES};
use crate::error::{Error, Result};

/// Rows of named numeric features with optional string labels and a mask of
/// columns that downstream analysis may use.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
    active: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        let width = names.len();
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::WidthMismatch {
                expected: width,
                actual: rows[i].len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::invalid(format!(
                    "{} labels for {} rows",
                    l.len(),
                    rows.len()
                )));
            }
        }
        Ok(Self {
            active: vec![true; width],
            names,
            rows,
            labels,
        })
    }

    /// Builds the full 77-column flow matrix.
    pub fn from_vectors(vectors: &[FeatureVector], labels: Option<Vec<String>>) -> Result<Self> {
        Self::new(
            FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            vectors.iter().map(|v| v.values.to_vec()).collect(),
            labels,
        )
    }

    pub fn empty(names: Vec<String>) -> Self {
        Self {
            active: vec![true; names.len()],
            names,
            rows: Vec::new(),
            labels: Some(Vec::new()),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[String]> {
        self.labels()
            .ok_or_else(|| Error::invalid("matrix has no labels"))
    }

    pub fn set_labels(&mut self, labels: Option<Vec<String>>) -> Result<()> {
        if let Some(l) = &labels {
            if l.len() != self.rows.len() {
                return Err(Error::invalid("label count does not match row count"));
            }
        }
        self.labels = labels;
        Ok(())
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn set_active_mask(&mut self, mask: Vec<bool>) -> Result<()> {
        if mask.len() != self.n_cols() {
            return Err(Error::WidthMismatch {
                expected: self.n_cols(),
                actual: mask.len(),
            });
        }
        self.active = mask;
        Ok(())
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| self.active[j]).collect()
    }

    pub fn active_names(&self) -> Vec<String> {
        self.active_indices()
            .into_iter()
            .map(|j| self.names[j].clone())
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Sorted distinct labels.
    pub fn label_alphabet(&self) -> Vec<String> {
        self.labels()
            .map(|l| l.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect())
            .unwrap_or_default()
    }

    /// Copy restricted to the active columns, with an all-true mask.
    pub fn project_active(&self) -> FeatureMatrix {
        let idx = self.active_indices();
        self.project(&idx)
    }

    fn project(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            active: vec![true; idx.len()],
        }
    }

    /// Copy with columns reordered to `names`; every name must exist.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::invalid(format!("missing feature column `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.project(&idx))
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i].clone()).collect()),
            active: self.active.clone(),
        }
    }

    pub fn with_rows(&self, rows: Vec<Vec<f64>>) -> Result<FeatureMatrix> {
        let mut m = FeatureMatrix::new(self.names.clone(), rows, None)?;
        if let Some(l) = &self.labels {
            if l.len() == m.n_rows() {
                m.labels = Some(l.clone());
            }
        }
        m.active = self.active.clone();
        Ok(m)
    }

    /// Appends rows of `other`, which must share the column names.
    pub fn concat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.names != other.names {
            return Err(Error::invalid("cannot concatenate matrices with different columns"));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        let mut m = FeatureMatrix::new(self.names.clone(), rows, labels)?;
        m.active = self.active.clone();
        Ok(m)
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, column: j });
            }
        }
        Ok(())
    }
}

/// Sample standard deviation (n - 1 denominator).
pub(crate) fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Masks out the statically discarded flow features, then every column whose
/// sample standard deviation is zero. Values are retained.
pub fn prune_static(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    if m.n_rows() < 2 {
        return Err(Error::invalid("pruning needs at least 2 rows"));
    }
    let mut mask = m.active_mask().to_vec();
    for (j, name) in m.names().iter().enumerate() {
        if let Some(i) = super::names::feature_index(name) {
            if red_listed(i) {
                mask[j] = false;
            }
        }
    }
    for (j, keep) in mask.iter_mut().enumerate() {
        if *keep && sample_std(&m.column(j)) == 0.0 {
            *keep = false;
        }
    }
    let mut out = m.clone();
    out.active = mask;
    Ok(out)
}
