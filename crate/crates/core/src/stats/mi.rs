use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::rank_descending;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const DEFAULT_MI_BINS: usize = 20;

/// Mutual information (nats) of each active feature with the label.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MiReport {
    pub names: Vec<String>,
    pub scores: Vec<f64>,
    /// Positions into `names`, highest score first.
    pub ranking: Vec<usize>,
}

impl MiReport {
    pub fn score(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.scores[i])
    }

    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking.iter().map(|&i| self.names[i].as_str()).collect()
    }
}

/// Bin index per value. Integer-valued columns with at most `bins` distinct
/// values keep their natural values; otherwise a value's bin is
/// `floor(bins * #{v' < v} / n)`, so ties share a bin and the binning only
/// depends on ranks.
pub(crate) fn discretize(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let integral = values.iter().all(|v| v.fract() == 0.0);
    if integral && distinct.len() <= bins {
        return values
            .iter()
            .map(|v| distinct.partition_point(|d| d < v))
            .collect();
    }
    let n = values.len();
    values
        .iter()
        .map(|v| bins * sorted.partition_point(|s| s < v) / n)
        .collect()
}

fn plug_in_mi(bins: &[usize], labels: &[usize]) -> f64 {
    let n = bins.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pl: BTreeMap<usize, f64> = BTreeMap::new();
    for (&b, &l) in bins.iter().zip(labels) {
        *joint.entry((b, l)).or_default() += 1.0;
        *pb.entry(b).or_default() += 1.0;
        *pl.entry(l).or_default() += 1.0;
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(b, l), &c)| {
            let pj = c / n;
            pj * (pj / ((pb[&b] / n) * (pl[&l] / n))).ln()
        })
        .sum();
    mi.max(0.0)
}

pub fn mutual_information(m: &FeatureMatrix, labels: &[String]) -> Result<MiReport> {
    mutual_information_with_bins(m, labels, DEFAULT_MI_BINS)
}

/// Plug-in mutual information over equal-frequency bins.
pub fn mutual_information_with_bins(m: &FeatureMatrix, labels: &[String], bins: usize) -> Result<MiReport> {
    if labels.len() != m.n_rows() {
        return Err(Error::invalid("label count does not match row count"));
    }
    if bins == 0 {
        return Err(Error::invalid("bin count must be positive"));
    }
    let idx = m.active_indices();
    let names: Vec<String> = idx.iter().map(|&j| m.names()[j].clone()).collect();
    let alphabet: BTreeMap<&str, usize> = {
        let mut a: Vec<&str> = labels.iter().map(String::as_str).collect();
        a.sort_unstable();
        a.dedup();
        a.into_iter().enumerate().map(|(i, s)| (s, i)).collect()
    };
    let scores: Vec<f64> = if alphabet.len() < 2 || m.n_rows() == 0 {
        vec![0.0; idx.len()]
    } else {
        let coded: Vec<usize> = labels.iter().map(|l| alphabet[l.as_str()]).collect();
        idx.par_iter()
            .map(|&j| plug_in_mi(&discretize(&m.column(j), bins), &coded))
            .collect()
    };
    let ranking = rank_descending(&scores);
    Ok(MiReport {
        names,
        scores,
        ranking,
    })
}
