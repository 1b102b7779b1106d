//! Classical feature analysis: correlation, mutual information and PCA.

mod mi;
mod pca;
mod pearson;

pub use mi::{mutual_information, mutual_information_with_bins, MiReport, DEFAULT_MI_BINS};
pub use pca::{pca_apply, pca_fit, PcaProjection};
pub use pearson::{correlated_pairs, pearson, pearson_matrix, CorrelatedPairs, CorrelationMatrix};

/// Indices sorted by descending score; ties keep the lower index first.
pub(crate) fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}
