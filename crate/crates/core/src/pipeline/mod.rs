//! End-to-end orchestration: label schema, train/test split, synthetic
//! corpora, the two-stage classifier and report runs.

mod config;
mod extract;
mod report;
mod schema;
mod split;
mod synth;
mod two_stage;

pub use config::{
    env_seed, AnalysisConfig, DataSource, ExplainConfig, FaithfulnessSection, ReportConfig, TwoStageConfig,
    DEFAULT_MAX_EXPLAIN_ROWS, SEED_ENV,
};
pub use extract::{capture_files, extract_labeled, extract_pcap};
pub use report::{
    read_manifest, rerun_manifest, run_report, run_report_file, sha256_hex, DataSummary, Manifest, MetricsReport,
    ModelFaithfulness, ModelResult, OutputRecord, ReportSummary, SeedRecord, ANALYSIS_FILE, FAITHFULNESS_FILE,
    FEATURES_FILE, MANIFEST_FILE, METRICS_FILE,
};
pub use schema::{LabelSchema, GATE_LABEL, STAGE1_LABELS, STAGE2_LABELS};
pub use split::{split, split_indices, DEFAULT_SPLIT_RATIO};
pub use synth::{
    synth_generate, synth_generate_detailed, synth_two_stage, Component, SynthClass, SynthSpec, DEFAULT_N_PER_CLASS,
    DEFAULT_SEPARATION, SYNTH_SLOTS,
};
pub use two_stage::{
    evaluate_pipeline, two_stage_classify, PipelineEvaluation, PipelineExplainers, PipelineModel, TwoStagePrediction,
    NOT_GATED,
};
