//! Offline IoT camera detection from packet captures.
//!
//! The crate turns pcap files into 77-feature flow vectors ([`pcap`],
//! [`features`]), analyses and classifies them ([`stats`], [`models`],
//! [`metrics`]), and attaches per-prediction attributions together with
//! faithfulness scores ([`xai`], [`faithfulness`]). [`pipeline`] wires the
//! stages into the two-stage traffic-category / camera-model classifier.

// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod faithfulness;
pub mod features;
pub mod metrics;
pub mod models;
pub mod pcap;
pub mod pipeline;
pub mod rng;
pub mod stats;
pub mod xai;

pub use error::{Error, ErrorClass, Result};
pub use features::{FeatureMatrix, FeatureVector};
pub use models::{ModelKind, ModelSpec, TrainedModel};
