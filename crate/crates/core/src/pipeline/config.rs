//! Report configuration: a TOML tree validated by hand so every error names
//! the offending field path (`models[0].kind`, `data.source`, ...).

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use super::schema::LabelSchema;
use super::split::DEFAULT_SPLIT_RATIO;
use super::synth::DEFAULT_N_PER_CLASS;
use crate::error::{Error, Result};
use crate::faithfulness::{DEFAULT_NOISE_FRAC, DEFAULT_RUNS, DEFAULT_TOP_K};
use crate::models::{ModelKind, ModelSpec};
use crate::pcap::FlowConfig;
use crate::stats::DEFAULT_MI_BINS;
use crate::xai::{Method, DEFAULT_BACKGROUND, DEFAULT_KERNEL_SAMPLES};

/// Environment variable consulted for the seed when a config omits it.
pub const SEED_ENV: &str = "CAMSIGHT_SEED";
pub const DEFAULT_MAX_EXPLAIN_ROWS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A named default synthetic spec (`synth4`, `synth6`).
    Synth { spec: String, n_per_class: usize },
    /// `synth4` rows carrying camera-model labels for the two-stage pipeline.
    SynthTwoStage { n_per_class: usize },
    Csv { path: PathBuf },
    Pcap {
        captures: Vec<(PathBuf, Option<String>)>,
        flow: FlowConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub mi_bins: usize,
    pub correlation_threshold: f64,
    pub pca_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainConfig {
    pub method: Method,
    pub background: usize,
    pub kernel_samples: usize,
    pub max_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaithfulnessSection {
    pub noise_frac: f64,
    pub runs: usize,
    pub k: usize,
    pub max_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageConfig {
    pub stage1: ModelSpec,
    pub stage2: ModelSpec,
    pub schema: LabelSchema,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub seed: u64,
    pub data: DataSource,
    pub split_ratio: f64,
    pub stratified: bool,
    pub models: Vec<ModelSpec>,
    pub analysis: Option<AnalysisConfig>,
    pub explain: Option<ExplainConfig>,
    pub faithfulness: Option<FaithfulnessSection>,
    pub two_stage: Option<TwoStageConfig>,
}

/// A table being consumed; leftover keys are reported as unknown.
struct Node<'a> {
    path: String,
    table: &'a Table,
    seen: Vec<&'static str>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl<'a> Node<'a> {
    fn new(path: impl Into<String>, table: &'a Table) -> Self {
        Node {
            path: path.into(),
            table,
            seen: Vec::new(),
        }
    }

    fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table.get(key)
    }

    fn require(&mut self, key: &'static str) -> Result<&'a Value> {
        let p = self.at(key);
        self.get(key).ok_or_else(|| Error::config(p, "missing required field"))
    }

    fn str_value(&self, key: &str, v: &'a Value) -> Result<&'a str> {
        v.as_str().ok_or_else(|| Error::config(self.at(key), "expected a string"))
    }

    fn opt_str(&mut self, key: &'static str) -> Result<Option<&'a str>> {
        match self.get(key) {
            Some(v) => self.str_value(key, v).map(Some),
            None => Ok(None),
        }
    }

    fn req_str(&mut self, key: &'static str) -> Result<&'a str> {
        let v = self.require(key)?;
        self.str_value(key, v)
    }

    fn opt_u64(&mut self, key: &'static str) -> Result<Option<u64>> {
        match self.get(key) {
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(Error::config(self.at(key), "expected a non-negative integer")),
            None => Ok(None),
        }
    }

    fn usize_or(&mut self, key: &'static str, default: usize) -> Result<usize> {
        Ok(self.opt_u64(key)?.map_or(default, |v| v as usize))
    }

    fn opt_f64(&mut self, key: &'static str) -> Result<Option<f64>> {
        match self.get(key) {
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(Error::config(self.at(key), "expected a number")),
            None => Ok(None),
        }
    }

    fn f64_or(&mut self, key: &'static str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn bool_or(&mut self, key: &'static str, default: bool) -> Result<bool> {
        match self.get(key) {
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(Error::config(self.at(key), "expected true or false")),
            None => Ok(default),
        }
    }

    fn opt_table(&mut self, key: &'static str) -> Result<Option<Node<'a>>> {
        let p = self.at(key);
        match self.get(key) {
            Some(Value::Table(t)) => Ok(Some(Node::new(p, t))),
            Some(_) => Err(Error::config(p, "expected a table")),
            None => Ok(None),
        }
    }

    fn opt_array(&mut self, key: &'static str) -> Result<Option<&'a Vec<Value>>> {
        match self.get(key) {
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(_) => Err(Error::config(self.at(key), "expected an array")),
            None => Ok(None),
        }
    }

    fn string_list(&mut self, key: &'static str) -> Result<Option<Vec<String>>> {
        let p = self.at(key);
        match self.opt_array(key)? {
            Some(a) => a
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| Error::config(format!("{p}[{i}]"), "expected a string"))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            None => Ok(None),
        }
    }

    fn positive(&self, key: &str, v: f64) -> Result<f64> {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::config(self.at(key), "must be positive"))
        }
    }

    /// Errors on keys nobody asked for.
    fn finish(self) -> Result<()> {
        match self.table.keys().find(|k| !self.seen.contains(&k.as_str())) {
            Some(k) => Err(Error::config(self.at(k), "unknown field")),
            None => Ok(()),
        }
    }
}

fn relative(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn model_spec(mut n: Node<'_>, seed: u64) -> Result<ModelSpec> {
    let kind_str = n.req_str("kind")?;
    let kind: ModelKind = kind_str
        .parse()
        .map_err(|e: Error| Error::config(n.at("kind"), e.to_string()))?;
    let mut s = ModelSpec::new(kind).with_seed(seed);
    s.max_depth = n.usize_or("max_depth", s.max_depth)?;
    s.n_estimators = n.usize_or("n_estimators", s.n_estimators)?;
    s.k = n.usize_or("k", s.k)?;
    s.max_iterations = n.usize_or("max_iterations", s.max_iterations)?;
    s.learning_rate = n.f64_or("learning_rate", s.learning_rate)?;
    s.l2 = n.f64_or("l2", s.l2)?;
    s.min_child_weight = n.f64_or("min_child_weight", s.min_child_weight)?;
    s.seed = n.opt_u64("seed")?.unwrap_or(s.seed);
    let path = n.path.clone();
    n.finish()?;
    s.validate().map_err(|e| Error::config(path, e.to_string()))?;
    Ok(s)
}

fn data_source(mut n: Node<'_>, base: &Path) -> Result<DataSource> {
    let source = n.req_str("source")?;
    let src = match source {
        "synth4" | "synth6" => DataSource::Synth {
            spec: source.to_string(),
            n_per_class: n.usize_or("n_per_class", DEFAULT_N_PER_CLASS)?,
        },
        "synth-two-stage" => DataSource::SynthTwoStage {
            n_per_class: n.usize_or("n_per_class", DEFAULT_N_PER_CLASS)?,
        },
        "csv" => DataSource::Csv {
            path: relative(base, n.req_str("path")?),
        },
        "pcap" => {
            let mut captures = Vec::new();
            if let Some(p) = n.opt_str("path")? {
                captures.push((relative(base, p), n.opt_str("label")?.map(str::to_string)));
            }
            let cap_path = n.at("captures");
            if let Some(list) = n.opt_array("captures")? {
                for (i, v) in list.iter().enumerate() {
                    let p = format!("{cap_path}[{i}]");
                    let t = v.as_table().ok_or_else(|| Error::config(p.clone(), "expected a table"))?;
                    let mut c = Node::new(p, t);
                    let path = relative(base, c.req_str("path")?);
                    let label = c.opt_str("label")?.map(str::to_string);
                    c.finish()?;
                    captures.push((path, label));
                }
            }
            if captures.is_empty() {
                return Err(Error::config(n.at("path"), "pcap source needs `path` or `captures`"));
            }
            let d = FlowConfig::default();
            let ft = n.f64_or("flow_timeout", d.flow_timeout_us as f64 / 1e6)?;
            let at = n.f64_or("activity_timeout", d.activity_timeout_us as f64 / 1e6)?;
            let flow = FlowConfig::from_secs(ft, at).map_err(|e| Error::config(n.at("flow_timeout"), e.to_string()))?;
            DataSource::Pcap { captures, flow }
        }
        other => {
            return Err(Error::config(
                n.at("source"),
                format!("unknown source `{other}` (expected synth4, synth6, synth-two-stage, csv or pcap)"),
            ))
        }
    };
    n.finish()?;
    Ok(src)
}

fn label_schema(mut n: Node<'_>) -> Result<LabelSchema> {
    let d = LabelSchema::default();
    let mut s = LabelSchema {
        stage1: n.string_list("stage1")?.unwrap_or(d.stage1),
        stage2: n.string_list("stage2")?.unwrap_or(d.stage2),
        gate: n.opt_str("gate")?.map_or(d.gate, str::to_string),
        aliases: Default::default(),
    };
    if let Some(a) = n.opt_table("aliases")? {
        for (k, v) in a.table {
            let to = v
                .as_str()
                .ok_or_else(|| Error::config(join(&a.path, k), "expected a string"))?;
            s.aliases.insert(k.clone(), to.to_string());
        }
    }
    let path = n.path.clone();
    n.finish()?;
    s.validate().map_err(|e| Error::config(path, e.to_string()))?;
    Ok(s)
}

impl ReportConfig {
    /// Parses a TOML config. Relative paths resolve against `base_dir`;
    /// `default_seed` fills a missing top-level `seed`.
    pub fn parse(text: &str, base_dir: &Path, default_seed: Option<u64>) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<root>", e.to_string()))?;
        let mut root = Node::new("", &table);

        let seed = match root.opt_u64("seed")? {
            Some(s) => s,
            None => default_seed.ok_or_else(|| Error::config("seed", format!("missing (set it or export {SEED_ENV})")))?,
        };

        let data = match root.opt_table("data")? {
            Some(n) => data_source(n, base_dir)?,
            None => return Err(Error::config("data", "missing required table")),
        };

        let (split_ratio, stratified) = match root.opt_table("split")? {
            Some(mut n) => {
                let r = n.f64_or("ratio", DEFAULT_SPLIT_RATIO)?;
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::config(n.at("ratio"), "must lie in (0, 1]"));
                }
                let s = n.bool_or("stratified", true)?;
                n.finish()?;
                (r, s)
            }
            None => (DEFAULT_SPLIT_RATIO, true),
        };

        let mut models = Vec::new();
        if let Some(list) = root.opt_array("models")? {
            for (i, v) in list.iter().enumerate() {
                let p = format!("models[{i}]");
                let t = v.as_table().ok_or_else(|| Error::config(p.clone(), "expected a table"))?;
                models.push(model_spec(Node::new(p, t), seed)?);
            }
        }

        let analysis = match root.opt_table("analysis")? {
            Some(mut n) => {
                let a = AnalysisConfig {
                    mi_bins: n.usize_or("mi_bins", DEFAULT_MI_BINS)?,
                    correlation_threshold: n.f64_or("correlation_threshold", 0.9)?,
                    pca_variance: n.f64_or("pca_variance", 0.95)?,
                };
                if a.mi_bins < 2 {
                    return Err(Error::config(n.at("mi_bins"), "must be at least 2"));
                }
                if !(0.0..=1.0).contains(&a.correlation_threshold) {
                    return Err(Error::config(n.at("correlation_threshold"), "must lie in [0, 1]"));
                }
                if !(a.pca_variance > 0.0 && a.pca_variance <= 1.0) {
                    return Err(Error::config(n.at("pca_variance"), "must lie in (0, 1]"));
                }
                n.finish()?;
                Some(a)
            }
            None => None,
        };

        let explain = match root.opt_table("explain")? {
            Some(mut n) => {
                let method = match n.opt_str("method")? {
                    Some(m) => m
                        .parse::<Method>()
                        .map_err(|e| Error::config(n.at("method"), e.to_string()))?,
                    None => Method::Tree,
                };
                let e = ExplainConfig {
                    method,
                    background: n.usize_or("background", DEFAULT_BACKGROUND)?,
                    kernel_samples: n.usize_or("kernel_samples", DEFAULT_KERNEL_SAMPLES)?,
                    max_rows: n.usize_or("max_rows", DEFAULT_MAX_EXPLAIN_ROWS)?,
                };
                if e.background == 0 || e.max_rows == 0 {
                    return Err(Error::config(n.at("background"), "background and max_rows must be positive"));
                }
                n.finish()?;
                Some(e)
            }
            None => None,
        };

        let faithfulness = match root.opt_table("faithfulness")? {
            Some(mut n) => {
                let f = FaithfulnessSection {
                    noise_frac: n.f64_or("noise_frac", DEFAULT_NOISE_FRAC)?,
                    runs: n.usize_or("runs", DEFAULT_RUNS)?,
                    k: n.usize_or("k", DEFAULT_TOP_K)?,
                    max_rows: n.usize_or("max_rows", DEFAULT_MAX_EXPLAIN_ROWS)?,
                };
                if !(f.noise_frac >= 0.0) {
                    return Err(Error::config(n.at("noise_frac"), "must be non-negative"));
                }
                if f.runs == 0 {
                    return Err(Error::config(n.at("runs"), "must be positive"));
                }
                n.positive("k", f.k as f64)?;
                n.finish()?;
                Some(f)
            }
            None => None,
        };
        if faithfulness.is_some() && explain.is_none() {
            return Err(Error::config("faithfulness", "needs an [explain] section"));
        }

        let two_stage = match root.opt_table("two_stage")? {
            Some(mut n) => {
                let s1 = n
                    .opt_table("stage1")?
                    .ok_or_else(|| Error::config(n.at("stage1"), "missing required table"))?;
                let stage1 = model_spec(s1, seed)?;
                let s2 = n
                    .opt_table("stage2")?
                    .ok_or_else(|| Error::config(n.at("stage2"), "missing required table"))?;
                let stage2 = model_spec(s2, seed)?;
                let schema = match n.opt_table("schema")? {
                    Some(s) => label_schema(s)?,
                    None => LabelSchema::default(),
                };
                n.finish()?;
                Some(TwoStageConfig { stage1, stage2, schema })
            }
            None => None,
        };

        root.finish()?;
        if two_stage.is_some() && matches!(data, DataSource::Synth { .. }) {
            return Err(Error::config("two_stage", "needs camera-model labels; use source = \"synth-two-stage\", csv or pcap"));
        }
        if models.is_empty() && two_stage.is_none() && !matches!(data, DataSource::Pcap { .. }) {
            return Err(Error::config("models", "at least one model is required"));
        }
        Ok(ReportConfig {
            seed,
            data,
            split_ratio,
            stratified,
            models,
            analysis,
            explain,
            faithfulness,
            two_stage,
        })
    }

    pub fn from_file(path: impl AsRef<Path>, default_seed: Option<u64>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok((Self::parse(&text, base, default_seed)?, text))
    }
}

/// Seed from [`SEED_ENV`], if set; a malformed value is a config error.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::config(SEED_ENV, format!("`{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}
