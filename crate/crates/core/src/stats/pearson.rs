use serde::Serialize;

use super::mi::MiReport;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }
}

/// Pearson r of two equally long samples; 0 when either is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Pairwise correlation of the active columns.
pub fn pearson_matrix(m: &FeatureMatrix) -> Result<CorrelationMatrix> {
    if m.n_rows() < 2 {
        return Err(Error::invalid("correlation needs at least 2 rows"));
    }
    let idx = m.active_indices();
    let cols: Vec<Vec<f64>> = idx.iter().map(|&j| m.column(j)).collect();
    let d = cols.len();
    let mut values = vec![vec![0.0; d]; d];
    for i in 0..d {
        let constant = cols[i].iter().all(|v| *v == cols[i][0]);
        values[i][i] = if constant { 0.0 } else { 1.0 };
        for j in i + 1..d {
            let r = pearson(&cols[i], &cols[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: idx.iter().map(|&j| m.names()[j].clone()).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelatedPairs {
    pub pairs: Vec<(String, String, f64)>,
    pub drop: Vec<String>,
}

/// Flags every pair with |r| above `threshold`. Within each connected group of
/// flagged features the one with the highest mutual information is kept (lower
/// index on ties, or when no report is given) and the rest are dropped.
pub fn correlated_pairs(c: &CorrelationMatrix, threshold: f64, mi: Option<&MiReport>) -> CorrelatedPairs {
    let d = c.names.len();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut pairs = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let r = c.values[i][j];
            if r.abs() > threshold {
                pairs.push((c.names[i].clone(), c.names[j].clone(), r));
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let score = |i: usize| mi.and_then(|r| r.score(&c.names[i])).unwrap_or(0.0);
    let mut keeper: Vec<Option<usize>> = vec![None; d];
    for i in 0..d {
        let root = find(&mut parent, i);
        keeper[root] = match keeper[root] {
            Some(k) if score(k) >= score(i) => Some(k),
            _ => Some(i),
        };
    }
    let mut drop = Vec::new();
    for i in 0..d {
        let root = find(&mut parent, i);
        let in_group = (0..d).any(|j| j != i && find(&mut parent, j) == root);
        if in_group && keeper[root] != Some(i) {
            drop.push(c.names[i].clone());
        }
    }
    CorrelatedPairs { pairs, drop }
}
