use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use camsight_core::faithfulness::{faithfulness_report, FaithfulnessConfig, DEFAULT_NOISE_FRAC, DEFAULT_RUNS, DEFAULT_TOP_K};
use camsight_core::features::{prune_static, read_feature_csv_file, write_feature_csv, FeatureMatrix};
use camsight_core::metrics::{evaluate, Evaluation};
use camsight_core::models::{load_model, save_model, train as train_model, ModelKind, ModelSpec, TrainedModel};
use camsight_core::pcap::FlowConfig;
use camsight_core::pipeline::{
    capture_files, evaluate_pipeline, extract_labeled, extract_pcap, read_manifest, rerun_manifest, run_report_file,
    split, synth_generate, synth_two_stage, LabelSchema, PipelineModel, SynthSpec, DEFAULT_SPLIT_RATIO,
};
use camsight_core::rng::derive_seed;
use camsight_core::stats::{correlated_pairs, mutual_information_with_bins, pca_fit, pearson_matrix, DEFAULT_MI_BINS};
use camsight_core::xai::{mean_abs, Explainer, Method, DEFAULT_BACKGROUND};

/// Failure that carries its own exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn split_seed(seed: u64) -> u64 {
    derive_seed(seed, 1)
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn csv_bytes(rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn load_labeled(path: &Path) -> Result<FeatureMatrix> {
    let m = read_feature_csv_file(path)?;
    m.require_labels()?;
    m.check_finite()?;
    Ok(m)
}

/// `(train, test)` of `m`, or `(m, m)` when no split was asked for.
fn maybe_split(m: FeatureMatrix, ratio: Option<f64>, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    match ratio {
        Some(r) => Ok(split(&m, r, split_seed(seed), true)?),
        None => Ok((m.clone(), m)),
    }
}

// ------------------------------------------------------------------ extract

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// pcap files or directories of them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Label written for every row.
    #[arg(long)]
    label: Option<String>,
    /// Idle time (seconds) after which a flow is closed.
    #[arg(long, default_value_t = 600.0)]
    flow_timeout: f64,
    /// Gap (seconds) that separates active periods.
    #[arg(long, default_value_t = 5.0)]
    activity_timeout: f64,
    /// Output CSV (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn seconds_to_us(s: f64, flag: &str) -> Result<u64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(camsight_core::Error::invalid(format!("--{flag} must be a positive number of seconds")).into());
    }
    Ok((s * 1e6).round() as u64)
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let config = FlowConfig {
        flow_timeout_us: seconds_to_us(a.flow_timeout, "flow-timeout")?,
        activity_timeout_us: seconds_to_us(a.activity_timeout, "activity-timeout")?,
    };
    let mut captures = Vec::new();
    for input in &a.inputs {
        for file in capture_files(input)? {
            captures.push((file, a.label.clone()));
        }
    }
    if captures.is_empty() {
        bail!(camsight_core::Error::invalid("no .pcap files found"));
    }
    if log::log_enabled!(log::Level::Info) {
        for (file, _) in &captures {
            let (v, stats) = extract_pcap(file, config)?;
            log::info!(
                "{}: {} records, {} skipped, {} flows",
                file.display(),
                stats.records,
                stats.skipped,
                v.len()
            );
        }
    }
    let m = extract_labeled(&captures, config)?;
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &m)?;
    write_out(a.output.as_deref(), &buf)
}

// ------------------------------------------------------------------ analyze

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Feature CSV.
    input: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = ".")]
    output: PathBuf,
    /// Equal-width bins for mutual information.
    #[arg(long, default_value_t = DEFAULT_MI_BINS)]
    bins: usize,
    /// |r| above which a feature pair counts as correlated.
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    /// Cumulative explained variance the PCA must reach.
    #[arg(long, default_value_t = 0.95)]
    variance: f64,
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let m = read_feature_csv_file(&a.input)?;
    m.check_finite()?;
    let active = prune_static(&m)?.project_active();
    fs::create_dir_all(&a.output).with_context(|| format!("creating {}", a.output.display()))?;

    let mi = match active.labels() {
        Some(labels) => {
            let labels = labels.to_vec();
            let mi = mutual_information_with_bins(&active, &labels, a.bins)?;
            let rows = std::iter::once(vec!["feature".to_string(), "mi".to_string()])
                .chain(mi.ranking.iter().map(|&i| vec![mi.names[i].clone(), mi.scores[i].to_string()]));
            fs::write(a.output.join("mi.csv"), csv_bytes(rows)?)?;
            Some(mi)
        }
        None => {
            log::warn!("no Label column; skipping mutual information");
            None
        }
    };

    let corr = pearson_matrix(&active)?;
    let header = std::iter::once("feature".to_string()).chain(corr.names.iter().cloned()).collect();
    let rows = std::iter::once(header).chain(
        corr.names
            .iter()
            .zip(&corr.values)
            .map(|(n, r)| std::iter::once(n.clone()).chain(r.iter().map(f64::to_string)).collect()),
    );
    fs::write(a.output.join("correlation.csv"), csv_bytes(rows)?)?;
    fs::write(
        a.output.join("correlated_pairs.json"),
        json(&correlated_pairs(&corr, a.threshold, mi.as_ref()))?,
    )?;

    let pca = pca_fit(&active, a.variance)?;
    fs::write(a.output.join("pca.json"), json(&pca)?)?;
    println!(
        "{} active features; PCA keeps {} components ({:.4} of variance)",
        active.n_cols(),
        pca.n_components(),
        pca.cumulative_ratio()
    );
    Ok(())
}

// ------------------------------------------------------------------ train

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// DT, kNN, NB, LR, RF, XGB, ET or AB.
    #[arg(long = "model", default_value = "XGB")]
    kind: ModelKind,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    n_estimators: Option<usize>,
    /// Neighbours for kNN.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl ModelArgs {
    fn spec(&self, seed: u64) -> Result<ModelSpec> {
        let mut s = ModelSpec::new(self.kind).with_seed(seed);
        if let Some(v) = self.max_depth {
            s.max_depth = v;
        }
        if let Some(v) = self.n_estimators {
            s.n_estimators = v;
        }
        if let Some(v) = self.k {
            s.k = v;
        }
        if let Some(v) = self.learning_rate {
            s.learning_rate = v;
        }
        if let Some(v) = self.max_iterations {
            s.max_iterations = v;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled feature CSV.
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Training fraction; the rest is held out for `eval --split`.
    #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
    split: f64,
    /// Model file to write.
    #[arg(short, long, default_value = "model.json")]
    output: PathBuf,
}

fn accuracy(model: &TrainedModel, m: &FeatureMatrix) -> Result<f64> {
    let pred = model.predict_matrix(m)?;
    let truth = m.require_labels()?;
    Ok(pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len().max(1) as f64)
}

pub fn train(a: TrainArgs, seed: u64) -> Result<()> {
    let spec = a.model.spec(seed)?;
    let data = prune_static(&load_labeled(&a.input)?)?;
    let (train_m, test_m) = split(&data, a.split, split_seed(seed), true)?;
    let model = train_model(&spec, &train_m)?;
    save_model(&model, &a.output)?;
    let test = if test_m.n_rows() > 0 {
        format!("{:.4}", accuracy(&model, &test_m)?)
    } else {
        "n/a".into()
    };
    println!(
        "{} on {} rows x {} features: train accuracy {:.4}, test accuracy {test}; saved {}",
        spec.kind,
        train_m.n_rows(),
        model.n_features(),
        accuracy(&model, &train_m)?,
        a.output.display()
    );
    Ok(())
}

// ------------------------------------------------------------------ eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file.
    model: PathBuf,
    /// Labeled feature CSV.
    input: PathBuf,
    /// Evaluate only the held-out part of this split (same seed as `train`).
    #[arg(long)]
    split: Option<f64>,
    /// Metrics JSON (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the confusion matrix as CSV.
    #[arg(long)]
    confusion: Option<PathBuf>,
}

pub fn eval(a: EvalArgs, seed: u64) -> Result<()> {
    let model = load_model(&a.model)?;
    let (_, test) = maybe_split(load_labeled(&a.input)?, a.split, seed)?;
    if test.n_rows() == 0 {
        bail!(camsight_core::Error::invalid("no rows to evaluate"));
    }
    let pred = model.predict_matrix(&test)?;
    let ev: Evaluation = evaluate(test.require_labels()?, &pred, &model.labels)?;
    if let Some(p) = &a.confusion {
        let c = &ev.confusion;
        let header = std::iter::once("truth\\predicted".to_string()).chain(c.labels.iter().cloned()).collect();
        let rows = std::iter::once(header).chain(
            c.labels
                .iter()
                .zip(&c.counts)
                .map(|(l, r)| std::iter::once(l.clone()).chain(r.iter().map(u64::to_string)).collect()),
        );
        fs::write(p, csv_bytes(rows)?)?;
    }
    write_out(a.output.as_deref(), &json(&ev)?)
}

// ------------------------------------------------------------------ explain

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Model file.
    model: PathBuf,
    /// Feature CSV; background rows come from its training part.
    input: PathBuf,
    #[arg(long, default_value = "tree")]
    method: Method,
    /// Class to explain (default: each row's predicted class).
    #[arg(long)]
    class: Option<String>,
    /// Background rows sampled from the training data.
    #[arg(long, default_value_t = DEFAULT_BACKGROUND)]
    background: usize,
    /// Features listed per instance.
    #[arg(long, default_value_t = 10)]
    topk: usize,
    /// Explain at most this many rows.
    #[arg(long, default_value_t = 20)]
    rows: usize,
    /// Coalitions per kernel SHAP explanation.
    #[arg(long)]
    kernel_samples: Option<usize>,
    /// Split the CSV: background from the training part, rows from the rest.
    #[arg(long)]
    split: Option<f64>,
    /// Per-instance JSON (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Mean |phi| per feature and class, as CSV.
    #[arg(long)]
    aggregate: Option<PathBuf>,
}

#[derive(Serialize)]
struct Contribution {
    feature: String,
    value: f64,
    phi: f64,
}

#[derive(Serialize)]
struct InstanceExplanation {
    instance: usize,
    class: String,
    base_value: f64,
    value: f64,
    /// Largest |phi| first; `rest` is the sum over unlisted features.
    features: Vec<Contribution>,
    rest: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    conditions: Vec<String>,
}

fn build_explainer(model: &TrainedModel, train: &FeatureMatrix, method: Method, n_bg: usize, seed: u64) -> Result<Explainer> {
    let aligned = model.align(train)?;
    let ex = Explainer::from_training(method, &aligned, n_bg, derive_seed(seed, 2))?;
    ex.check_model(model)?;
    Ok(ex)
}

pub fn explain(a: ExplainArgs, seed: u64) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = read_feature_csv_file(&a.input)?;
    data.check_finite()?;
    let (train_m, test_m) = match a.split {
        Some(_) => maybe_split(data, a.split, seed)?,
        None => (data.clone(), data),
    };
    let mut ex = build_explainer(&model, &train_m, a.method, a.background, seed)?;
    if let Some(n) = a.kernel_samples {
        ex.kernel_samples = n;
    }
    let fixed = match &a.class {
        Some(c) => Some(
            model
                .label_index(c)
                .ok_or_else(|| camsight_core::Error::UnknownLabel(c.clone()))?,
        ),
        None => None,
    };
    let aligned = model.align(&test_m)?;
    let rows = &aligned.rows()[..aligned.n_rows().min(a.rows)];

    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let class = fixed.unwrap_or_else(|| model.predict_index(row));
        let attr = ex.explain(&model, row, class, i)?;
        let order = attr.ranking();
        let (shown, hidden) = order.split_at(a.topk.min(order.len()));
        let conditions = if a.method == Method::Lime {
            ex.explain_lime(&model, row, class, i)?
                .conditions
                .into_iter()
                .map(|c| c.text)
                .collect()
        } else {
            Vec::new()
        };
        out.push(InstanceExplanation {
            instance: i,
            class: model.labels[class].clone(),
            base_value: attr.base_value,
            value: attr.value,
            features: shown
                .iter()
                .map(|&j| Contribution {
                    feature: model.feature_names[j].clone(),
                    value: row[j],
                    phi: attr.phi[j],
                })
                .collect(),
            rest: hidden.iter().map(|&j| attr.phi[j]).sum(),
            conditions,
        });
    }

    if let Some(p) = &a.aggregate {
        let classes: Vec<usize> = match fixed {
            Some(c) => vec![c],
            None => (0..model.n_classes()).collect(),
        };
        let means = classes
            .iter()
            .map(|&c| Ok(mean_abs(&ex.explain_rows(&model, rows, c)?, model.n_features())))
            .collect::<Result<Vec<_>>>()?;
        let header = std::iter::once("feature".to_string())
            .chain(classes.iter().map(|&c| model.labels[c].clone()))
            .collect();
        let body = model
            .feature_names
            .iter()
            .enumerate()
            .map(|(j, n)| std::iter::once(n.clone()).chain(means.iter().map(|m| m[j].to_string())).collect());
        fs::write(p, csv_bytes(std::iter::once(header).chain(body))?)?;
    }
    write_out(a.output.as_deref(), &json(&out)?)
}

// ------------------------------------------------------------------ faithful

#[derive(Debug, Args)]
pub struct FaithfulArgs {
    /// Model file.
    model: PathBuf,
    /// Feature CSV.
    input: PathBuf,
    #[arg(long, default_value = "tree")]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_BACKGROUND)]
    background: usize,
    /// Noise standard deviation as a fraction of each feature's std.
    #[arg(long, default_value_t = DEFAULT_NOISE_FRAC)]
    noise: f64,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    /// Features kept for sufficiency.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    k: usize,
    /// Score at most this many rows.
    #[arg(long, default_value_t = 200)]
    rows: usize,
    #[arg(long)]
    split: Option<f64>,
    /// Report JSON (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn faithful(a: FaithfulArgs, seed: u64) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = read_feature_csv_file(&a.input)?;
    data.check_finite()?;
    let (train_m, test_m) = match a.split {
        Some(_) => maybe_split(data, a.split, seed)?,
        None => (data.clone(), data),
    };
    let ex = build_explainer(&model, &train_m, a.method, a.background, seed)?;
    let train_a = model.align(&train_m)?;
    let test_a = model.align(&test_m)?;
    let rows = &test_a.rows()[..test_a.n_rows().min(a.rows)];
    if a.k > model.n_features() {
        bail!(camsight_core::Error::invalid(format!(
            "--k {} exceeds the model's {} features",
            a.k,
            model.n_features()
        )));
    }
    let report = faithfulness_report(
        &model,
        rows,
        train_a.rows(),
        &ex,
        FaithfulnessConfig {
            noise_frac: a.noise,
            runs: a.runs,
            k: a.k,
            seed: derive_seed(seed, 3),
        },
    )?;
    eprintln!(
        "consistency {:.4}, sufficiency@{} {:.4} over {} rows",
        report.overall_consistency,
        report.config.k,
        report.sufficiency,
        rows.len()
    );
    write_out(a.output.as_deref(), &json(&report)?)
}

// ------------------------------------------------------------------ synth

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// synth4, synth6 or two-stage (fine camera labels).
    #[arg(long, default_value = "synth4")]
    spec: String,
    /// Rows per class.
    #[arg(long, default_value_t = camsight_core::pipeline::DEFAULT_N_PER_CLASS)]
    n: usize,
    /// Output CSV (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    let m = if a.spec == "two-stage" {
        synth_two_stage(a.n, seed)?
    } else {
        let mut s = SynthSpec::by_name(&a.spec, seed)?;
        s.n_per_class = a.n;
        synth_generate(&s)?
    };
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &m)?;
    write_out(a.output.as_deref(), &buf)
}

// ------------------------------------------------------------------ pipeline

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Feature CSV with fine labels (camera models for camera rows).
    /// Omit to use the synthetic two-stage corpus.
    input: Option<PathBuf>,
    /// Rows per class for the synthetic corpus.
    #[arg(long, default_value_t = camsight_core::pipeline::DEFAULT_N_PER_CLASS)]
    synth_n: usize,
    #[arg(long, default_value = "XGB")]
    stage1: ModelKind,
    #[arg(long, default_value = "XGB")]
    stage2: ModelKind,
    #[arg(long, default_value_t = DEFAULT_SPLIT_RATIO)]
    split: f64,
    /// Attach attributions of this method to each prediction.
    #[arg(long)]
    explain: Option<Method>,
    #[arg(long, default_value_t = DEFAULT_BACKGROUND)]
    background: usize,
    /// Save the trained pipeline as JSON.
    #[arg(long)]
    save: Option<PathBuf>,
    /// Per-row predictions on the test split, as JSON.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Evaluation JSON (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct RowPrediction<'a> {
    row: usize,
    truth: &'a str,
    #[serde(flatten)]
    prediction: &'a camsight_core::pipeline::TwoStagePrediction,
}

pub fn pipeline(a: PipelineArgs, seed: u64) -> Result<()> {
    let data = match &a.input {
        Some(p) => load_labeled(p)?,
        None => synth_two_stage(a.synth_n, seed)?,
    };
    let data = prune_static(&data)?;
    let (train_m, test_m) = split(&data, a.split, split_seed(seed), true)?;
    let schema = LabelSchema::default();
    let p = PipelineModel::train(
        &train_m,
        &ModelSpec::new(a.stage1).with_seed(derive_seed(seed, 4)),
        &ModelSpec::new(a.stage2).with_seed(derive_seed(seed, 5)),
        &schema,
    )?;
    if let Some(path) = &a.save {
        fs::write(path, json(&p)?).with_context(|| format!("writing {}", path.display()))?;
    }
    if test_m.n_rows() == 0 {
        bail!(camsight_core::Error::invalid("empty test split; lower --split"));
    }
    if let Some(path) = &a.predictions {
        let explainers = match a.explain {
            Some(m) => Some(p.explainers(&train_m, m, a.background, derive_seed(seed, 2))?),
            None => None,
        };
        let preds = p.classify_matrix(&test_m, explainers.as_ref())?;
        let truth = test_m.require_labels()?;
        let rows: Vec<RowPrediction> = preds
            .iter()
            .enumerate()
            .map(|(i, prediction)| RowPrediction {
                row: i,
                truth: &truth[i],
                prediction,
            })
            .collect();
        fs::write(path, json(&rows)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let ev = evaluate_pipeline(&p, &test_m)?;
    if ev.gating_violations > 0 {
        return Err(Failure {
            code: 3,
            message: format!("{} rows broke the stage-2 gate", ev.gating_violations),
        }
        .into());
    }
    write_out(a.output.as_deref(), &json(&ev)?)
}

// ------------------------------------------------------------------ report

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report config (TOML).
    #[arg(required_unless_present = "rerun", conflicts_with = "rerun")]
    config: Option<PathBuf>,
    /// Re-run a manifest and check every output hash against it.
    #[arg(long)]
    rerun: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
}

pub fn report(a: ReportArgs, seed: Option<u64>) -> Result<()> {
    let summary = match (&a.config, &a.rerun) {
        (Some(cfg), _) => run_report_file(cfg, seed, &a.output)?,
        (None, Some(manifest_path)) => {
            let manifest = read_manifest(manifest_path)?;
            let s = rerun_manifest(&manifest, &a.output)?;
            let diff = manifest.mismatches(&s.manifest);
            if !diff.is_empty() {
                return Err(Failure {
                    code: 3,
                    message: format!("rerun differs from the manifest in: {}", diff.join(", ")),
                }
                .into());
            }
            eprintln!("rerun matches all {} recorded outputs", manifest.outputs.len());
            s
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    for o in &summary.manifest.outputs {
        println!("{}  {}", o.sha256, summary.out_dir.join(&o.file).display());
    }
    Ok(())
}
