//! Flow feature vectors, the feature matrix, static pruning and CSV I/O.

mod compute;
mod csv_io;
mod matrix;
mod names;

pub use compute::{compute_features, FeatureVector, BULK_GAP_US, BULK_MIN_PACKETS, SUBFLOW_GAP_US};
pub use csv_io::{
    format_value, read_feature_csv, read_feature_csv_file, write_feature_csv, write_feature_csv_file,
    LABEL_COLUMN,
};
pub(crate) use matrix::sample_std;
pub use matrix::{prune_static, FeatureMatrix};
pub use names::{feature_index, red_listed, FEATURE_NAMES, N_FEATURES, RED_LIST_START};
