//! Report runs: data loading, training, evaluation, attribution and
//! faithfulness, written as JSON/CSV files plus a manifest that reproduces
//! the run.
//!
//! Output files carry no timestamps or host details; a rerun of the same
//! manifest on the same machine writes byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DataSource, ReportConfig};
use super::extract::extract_labeled;
use super::split::split;
use super::synth::{synth_generate, synth_two_stage, SynthSpec};
use super::two_stage::{evaluate_pipeline, PipelineEvaluation, PipelineModel};
use crate::error::{Error, Result};
use crate::faithfulness::{faithfulness_report, FaithfulnessConfig, FaithfulnessReport};
use crate::features::{format_value, prune_static, read_feature_csv_file, write_feature_csv, FeatureMatrix};
use crate::metrics::{evaluate, Evaluation};
use crate::models::{train, ModelKind, ModelSpec, TrainedModel};
use crate::rng::derive_seed;
use crate::stats::{correlated_pairs, mutual_information_with_bins, pca_fit, pearson_matrix};
use crate::xai::{mean_abs, Explainer, Method};

pub const MANIFEST_FORMAT: &str = "camsight-report";
pub const FEATURES_FILE: &str = "features.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const FAITHFULNESS_FILE: &str = "faithfulness.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub active_features: Vec<String>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub spec: ModelSpec,
    /// Empty when the test split is empty.
    pub evaluation: Option<Evaluation>,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub data: DataSummary,
    pub models: Vec<ModelResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_stage: Option<PipelineEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFaithfulness {
    pub model: ModelKind,
    pub method: Method,
    pub rows: usize,
    pub report: FaithfulnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub root: u64,
    pub data: u64,
    pub split: u64,
    pub models: Vec<u64>,
    pub explain: u64,
    pub faithfulness: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub config_sha256: String,
    /// Verbatim config text; relative paths in it resolve against `base_dir`.
    pub config: String,
    pub base_dir: PathBuf,
    pub seeds: SeedRecord,
    pub outputs: Vec<OutputRecord>,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub metrics: Option<MetricsReport>,
    pub faithfulness: Vec<ModelFaithfulness>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], outputs: &mut Vec<OutputRecord>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::file(&path, e))?;
    outputs.push(OutputRecord {
        file: name.to_string(),
        sha256: sha256_hex(bytes),
    });
    Ok(())
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn load_data(data: &DataSource, seed: u64) -> Result<FeatureMatrix> {
    match data {
        DataSource::Synth { spec, n_per_class } => {
            let mut s = SynthSpec::by_name(spec, seed)?;
            s.n_per_class = *n_per_class;
            synth_generate(&s)
        }
        DataSource::SynthTwoStage { n_per_class } => synth_two_stage(*n_per_class, seed),
        DataSource::Csv { path } => read_feature_csv_file(path),
        DataSource::Pcap { captures, flow } => extract_labeled(captures, *flow),
    }
}

fn accuracy(model: &TrainedModel, m: &FeatureMatrix) -> Result<f64> {
    let pred = model.predict_matrix(m)?;
    let truth = m.require_labels()?;
    Ok(pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len().max(1) as f64)
}

fn analysis_json(train: &FeatureMatrix, cfg: &super::config::AnalysisConfig) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Analysis {
        mutual_information: Vec<(String, f64)>,
        correlated_pairs: crate::stats::CorrelatedPairs,
        pca_components: usize,
        pca_cumulative_ratio: f64,
        pca_explained_ratio: Vec<f64>,
    }
    let active = train.project_active();
    let labels = active.require_labels()?.to_vec();
    let mi = mutual_information_with_bins(&active, &labels, cfg.mi_bins)?;
    let corr = pearson_matrix(&active)?;
    let pairs = correlated_pairs(&corr, cfg.correlation_threshold, Some(&mi));
    let pca = pca_fit(&active, cfg.pca_variance)?;
    json_bytes(&Analysis {
        mutual_information: mi.ranking.iter().map(|&i| (mi.names[i].clone(), mi.scores[i])).collect(),
        correlated_pairs: pairs,
        pca_components: pca.n_components(),
        pca_cumulative_ratio: pca.cumulative_ratio(),
        pca_explained_ratio: pca.explained_ratio.clone(),
    })
}

/// Mean |phi| per feature (rows) and class (columns).
fn attribution_csv(model: &TrainedModel, per_class: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["feature".to_string()];
    header.extend(model.labels.iter().cloned());
    w.write_record(&header)?;
    for (j, name) in model.feature_names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend(per_class.iter().map(|s| format_value(s[j])));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Waterfall data for one instance: base value, each feature's
/// contribution in descending |phi| order, and the explained output.
fn waterfall_csv(model: &TrainedModel, explainer: &Explainer, row: &[f64]) -> Result<Vec<u8>> {
    let class = model.predict_index(row);
    let a = explainer.explain(model, row, class, 0)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "feature", "value", "contribution", "cumulative"])?;
    let mut acc = a.base_value;
    w.write_record(["base", "", "", "", &format_value(acc)])?;
    for j in a.ranking() {
        acc += a.phi[j];
        w.write_record([
            "feature",
            &model.feature_names[j],
            &format_value(row[j]),
            &format_value(a.phi[j]),
            &format_value(acc),
        ])?;
    }
    w.write_record(["output", &model.labels[class], "", "", &format_value(a.value)])?;
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Runs a report and writes its files into `out_dir` (created if needed).
pub fn run_report(config: &ReportConfig, config_text: &str, base_dir: &Path, out_dir: &Path) -> Result<ReportSummary> {
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    let seed = config.seed;
    let seeds = SeedRecord {
        root: seed,
        data: seed,
        split: derive_seed(seed, 1),
        models: config.models.iter().map(|m| m.seed).collect(),
        explain: derive_seed(seed, 2),
        faithfulness: derive_seed(seed, 3),
    };
    let mut outputs = Vec::new();

    let data = load_data(&config.data, seeds.data)?;
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &data)?;
    write_file(out_dir, FEATURES_FILE, &buf, &mut outputs)?;

    let mut metrics = None;
    let mut faithfulness = Vec::new();
    if !config.models.is_empty() || config.two_stage.is_some() {
        data.require_labels()?;
        data.check_finite()?;
        let pruned = prune_static(&data)?;
        let (train_m, test_m) = split(&pruned, config.split_ratio, seeds.split, config.stratified)?;

        if let Some(a) = &config.analysis {
            write_file(out_dir, ANALYSIS_FILE, &analysis_json(&train_m, a)?, &mut outputs)?;
        }

        let trained: Vec<TrainedModel> = config
            .models
            .par_iter()
            .map(|spec| train(spec, &train_m))
            .collect::<Result<_>>()?;
        let mut results = Vec::new();
        for model in &trained {
            let evaluation = if test_m.n_rows() > 0 {
                let pred = model.predict_matrix(&test_m)?;
                Some(evaluate(test_m.require_labels()?, &pred, &model.labels)?)
            } else {
                None
            };
            results.push(ModelResult {
                spec: model.spec.clone(),
                evaluation,
                train_accuracy: accuracy(model, &train_m)?,
            });
        }

        if let Some(ex_cfg) = &config.explain {
            let explain_src = if test_m.n_rows() > 0 { &test_m } else { &train_m };
            for model in &trained {
                let train_aligned = model.align(&train_m)?;
                let mut explainer = Explainer::from_training(ex_cfg.method, &train_aligned, ex_cfg.background, seeds.explain)?;
                explainer.kernel_samples = ex_cfg.kernel_samples;
                if let Err(e) = explainer.check_model(model) {
                    log::warn!("skipping attributions for {}: {e}", model.kind());
                    continue;
                }
                let aligned = model.align(explain_src)?;
                let n = aligned.n_rows().min(ex_cfg.max_rows);
                let rows = &aligned.rows()[..n];
                let per_class = (0..model.n_classes())
                    .map(|c| Ok(mean_abs(&explainer.explain_rows(model, rows, c)?, model.n_features())))
                    .collect::<Result<Vec<_>>>()?;
                let kind = model.kind();
                write_file(
                    out_dir,
                    &format!("attributions_{kind}.csv"),
                    &attribution_csv(model, &per_class)?,
                    &mut outputs,
                )?;
                write_file(
                    out_dir,
                    &format!("waterfall_{kind}.csv"),
                    &waterfall_csv(model, &explainer, &rows[0])?,
                    &mut outputs,
                )?;
                if let Some(f) = &config.faithfulness {
                    let n = aligned.n_rows().min(f.max_rows);
                    let report = faithfulness_report(
                        model,
                        &aligned.rows()[..n],
                        train_aligned.rows(),
                        &explainer,
                        FaithfulnessConfig {
                            noise_frac: f.noise_frac,
                            runs: f.runs,
                            k: f.k,
                            seed: seeds.faithfulness,
                        },
                    )?;
                    faithfulness.push(ModelFaithfulness {
                        model: kind,
                        method: ex_cfg.method,
                        rows: n,
                        report,
                    });
                }
            }
            if config.faithfulness.is_some() {
                write_file(out_dir, FAITHFULNESS_FILE, &json_bytes(&faithfulness)?, &mut outputs)?;
            }
        }

        let two_stage = match &config.two_stage {
            Some(t) => {
                let p = PipelineModel::train(&train_m, &t.stage1, &t.stage2, &t.schema)?;
                if test_m.n_rows() > 0 {
                    Some(evaluate_pipeline(&p, &test_m)?)
                } else {
                    None
                }
            }
            None => None,
        };

        let report = MetricsReport {
            seed,
            data: DataSummary {
                rows: pruned.n_rows(),
                train_rows: train_m.n_rows(),
                test_rows: test_m.n_rows(),
                active_features: pruned.active_names(),
                labels: pruned.label_alphabet(),
            },
            models: results,
            two_stage,
        };
        write_file(out_dir, METRICS_FILE, &json_bytes(&report)?, &mut outputs)?;
        metrics = Some(report);
    }

    outputs.sort_by(|a, b| a.file.cmp(&b.file));
    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        config: config_text.to_string(),
        base_dir: base_dir.to_path_buf(),
        seeds,
        outputs,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let mut f = fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
    f.write_all(&json_bytes(&manifest)?).map_err(|e| Error::file(&path, e))?;
    Ok(ReportSummary {
        out_dir: out_dir.to_path_buf(),
        manifest,
        metrics,
        faithfulness,
    })
}

/// Config file to report.
pub fn run_report_file(config_path: &Path, default_seed: Option<u64>, out_dir: &Path) -> Result<ReportSummary> {
    let (config, text) = ReportConfig::from_file(config_path, default_seed)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    run_report(&config, &text, base, out_dir)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != MANIFEST_FORMAT {
        return Err(Error::invalid(format!("{} is not a report manifest", path.display())));
    }
    if sha256_hex(m.config.as_bytes()) != m.config_sha256 {
        return Err(Error::invalid("manifest config does not match its recorded hash"));
    }
    Ok(m)
}

/// Re-runs the config recorded in a manifest. The result's outputs can be
/// compared with [`Manifest::mismatches`].
pub fn rerun_manifest(manifest: &Manifest, out_dir: &Path) -> Result<ReportSummary> {
    let config = ReportConfig::parse(&manifest.config, &manifest.base_dir, Some(manifest.seeds.root))?;
    run_report(&config, &manifest.config, &manifest.base_dir, out_dir)
}

impl Manifest {
    /// Output files whose hash differs from (or is missing in) `other`.
    pub fn mismatches(&self, other: &Manifest) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|o| !other.outputs.iter().any(|p| p.file == o.file && p.sha256 == o.sha256))
            .map(|o| o.file.clone())
            .collect()
    }

    pub fn output_hash(&self, file: &str) -> Option<&str> {
        self.outputs.iter().find(|o| o.file == file).map(|o| o.sha256.as_str())
    }
}
