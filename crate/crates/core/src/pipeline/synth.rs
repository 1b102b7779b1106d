//! Seeded Gaussian-mixture stand-ins for labeled flow corpora.
//!
//! Rows fill the 63 flow-feature slots ahead of the red list (the remaining
//! 14 columns are zero and masked inactive). All default specs share one
//! fixed "world": nine prototype clusters that differ along eight
//! informative slots, six of them camera models and three the non-camera
//! traffic categories. `synth6` draws the six cameras, `synth4` draws the
//! three categories plus `IoTCam`, an equal-weight mixture of the cameras.
//! The remaining slots carry class-independent noise, a few with weak
//! class-dependent shifts. Each slot is finally scaled and offset so column
//! magnitudes span several orders.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schema::{STAGE1_LABELS, STAGE2_LABELS};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FEATURE_NAMES, N_FEATURES, RED_LIST_START};
use crate::rng::{self, derived_rng};

pub const SYNTH_SLOTS: usize = RED_LIST_START;
pub const DEFAULT_SEPARATION: f64 = 8.0;
pub const DEFAULT_N_PER_CLASS: usize = 600;
const WORLD_SEED: u64 = 0x00C0_FFEE_CA11_0001;
const INFORMATIVE: usize = 8;
const WEAK: usize = 8;
/// Half-width of the per-prototype jitter on informative slots.
const JITTER: f64 = 0.2;

/// One diagonal Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Fine label carried by rows drawn from this component, if it differs
    /// from the class label.
    pub name: Option<String>,
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub label: String,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    /// Prototype distance (in noise standard deviations) the spec was built with.
    pub separation: f64,
    pub n_per_class: usize,
    pub seed: u64,
}

struct World {
    /// Per prototype: mean and variance in standardized slot units.
    protos: Vec<(Vec<f64>, Vec<f64>)>,
    scale: Vec<f64>,
    offset: Vec<f64>,
}

fn world(separation: f64) -> World {
    let mut r = rng::rng(WORLD_SEED);
    let mut slots: Vec<usize> = (0..SYNTH_SLOTS).collect();
    slots.shuffle(&mut r);
    let informative = &slots[..INFORMATIVE];
    let weak = &slots[INFORMATIVE..INFORMATIVE + WEAK];
    let scale: Vec<f64> = (0..SYNTH_SLOTS).map(|_| 10f64.powf(r.random_range(0.0..3.0))).collect();
    let offset: Vec<f64> = scale.iter().map(|s| r.random_range(2.0..6.0) * s).collect();
    let protos = (0..INFORMATIVE + 1)
        .map(|k| {
            let mut mean = vec![0.0; SYNTH_SLOTS];
            let mut var = vec![1.0; SYNTH_SLOTS];
            for (i, &j) in informative.iter().enumerate() {
                let axis = if i == k { separation } else { 0.0 };
                mean[j] = axis + r.random_range(-JITTER..JITTER);
                var[j] = r.random_range(0.5..1.2);
            }
            for &j in weak {
                mean[j] = r.random_range(-0.5..0.5);
            }
            (mean, var)
        })
        .collect();
    World { protos, scale, offset }
}

impl World {
    fn component(&self, k: usize, name: Option<String>, weight: f64) -> Component {
        let (m, v) = &self.protos[k];
        Component {
            name,
            weight,
            mean: m.iter().enumerate().map(|(j, z)| self.offset[j] + self.scale[j] * z).collect(),
            variance: v.iter().enumerate().map(|(j, s)| s * self.scale[j] * self.scale[j]).collect(),
        }
    }
}

/// Prototype index of each camera (0..6) and of Conf, Share, Others.
fn category_proto(label: &str) -> usize {
    match label {
        "Conf" => 6,
        "Share" => 7,
        _ => 8,
    }
}

impl SynthSpec {
    /// Six camera classes, one cluster each.
    pub fn synth6(seed: u64) -> Self {
        Self::synth6_with(DEFAULT_SEPARATION, DEFAULT_N_PER_CLASS, seed)
    }

    /// Conf, Share, IoTCam and Others; IoTCam mixes the six camera clusters.
    pub fn synth4(seed: u64) -> Self {
        Self::synth4_with(DEFAULT_SEPARATION, DEFAULT_N_PER_CLASS, seed)
    }

    pub fn synth6_with(separation: f64, n_per_class: usize, seed: u64) -> Self {
        let w = world(separation);
        let classes = STAGE2_LABELS
            .iter()
            .enumerate()
            .map(|(k, l)| SynthClass {
                label: l.to_string(),
                components: vec![w.component(k, None, 1.0)],
            })
            .collect();
        SynthSpec {
            classes,
            separation,
            n_per_class,
            seed,
        }
    }

    pub fn synth4_with(separation: f64, n_per_class: usize, seed: u64) -> Self {
        let w = world(separation);
        let classes = STAGE1_LABELS
            .iter()
            .map(|&l| SynthClass {
                label: l.to_string(),
                components: if l == "IoTCam" {
                    STAGE2_LABELS
                        .iter()
                        .enumerate()
                        .map(|(k, cam)| w.component(k, Some(cam.to_string()), 1.0 / 6.0))
                        .collect()
                } else {
                    vec![w.component(category_proto(l), None, 1.0)]
                },
            })
            .collect();
        SynthSpec {
            classes,
            separation,
            n_per_class,
            seed,
        }
    }

    pub fn by_name(name: &str, seed: u64) -> Result<Self> {
        match name {
            "synth4" => Ok(Self::synth4(seed)),
            "synth6" => Ok(Self::synth6(seed)),
            _ => Err(Error::invalid(format!("unknown synthetic spec `{name}` (expected synth4 or synth6)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::invalid("synthetic spec has no classes"));
        }
        for c in &self.classes {
            if c.components.is_empty() {
                return Err(Error::invalid(format!("class `{}` has no components", c.label)));
            }
            for comp in &c.components {
                if comp.mean.len() != SYNTH_SLOTS || comp.variance.len() != SYNTH_SLOTS {
                    return Err(Error::WidthMismatch {
                        expected: SYNTH_SLOTS,
                        actual: comp.mean.len().min(comp.variance.len()),
                    });
                }
                if !(comp.weight > 0.0 && comp.weight.is_finite()) {
                    return Err(Error::invalid(format!("class `{}` has a non-positive mixture weight", c.label)));
                }
                if comp.mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("class `{}` has a non-finite mean", c.label)));
                }
                if let Some(j) = comp.variance.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::invalid(format!(
                        "class `{}`: covariance is not positive definite (variance {} in slot {j})",
                        c.label, comp.variance[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Log density of `row` (first 63 slots) under one class mixture.
    pub fn log_density(&self, class: usize, row: &[f64]) -> f64 {
        let logs: Vec<f64> = self.classes[class]
            .components
            .iter()
            .map(|c| {
                let total: f64 = self.classes[class].components.iter().map(|c| c.weight).sum();
                let mut l = (c.weight / total).ln();
                for ((x, mu), var) in row.iter().zip(&c.mean).zip(&c.variance) {
                    let d = x - mu;
                    l -= 0.5 * (d * d / var + (2.0 * std::f64::consts::PI * var).ln());
                }
                l
            })
            .collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    }
}

/// Rows, class labels and per-row fine labels.
pub fn synth_generate_detailed(s: &SynthSpec) -> Result<(FeatureMatrix, Vec<String>)> {
    s.validate()?;
    let mut rows = Vec::with_capacity(s.n_per_class * s.classes.len());
    let mut labels = Vec::new();
    let mut fine = Vec::new();
    for (ci, class) in s.classes.iter().enumerate() {
        let mut r = derived_rng(s.seed, ci as u64);
        let total: f64 = class.components.iter().map(|c| c.weight).sum();
        for _ in 0..s.n_per_class {
            let u = r.random::<f64>() * total;
            let mut acc = 0.0;
            let mut comp = &class.components[class.components.len() - 1];
            for c in &class.components {
                acc += c.weight;
                if u < acc {
                    comp = c;
                    break;
                }
            }
            let mut row = vec![0.0; N_FEATURES];
            for ((x, mu), var) in row.iter_mut().zip(&comp.mean).zip(&comp.variance) {
                let z: f64 = StandardNormal.sample(&mut r);
                *x = mu + var.sqrt() * z;
            }
            rows.push(row);
            labels.push(class.label.clone());
            fine.push(comp.name.clone().unwrap_or_else(|| class.label.clone()));
        }
    }
    let mut m = FeatureMatrix::new(FEATURE_NAMES.iter().map(|n| n.to_string()).collect(), rows, Some(labels))?;
    m.set_active_mask((0..N_FEATURES).map(|j| j < SYNTH_SLOTS).collect())?;
    Ok((m, fine))
}

/// Labeled rows drawn class by class from `s`.
pub fn synth_generate(s: &SynthSpec) -> Result<FeatureMatrix> {
    synth_generate_detailed(s).map(|(m, _)| m)
}

/// `synth4` rows labeled with fine labels: the camera model for IoTCam rows,
/// the category otherwise. Feeds the two-stage pipeline.
pub fn synth_two_stage(n_per_class: usize, seed: u64) -> Result<FeatureMatrix> {
    let (mut m, fine) = synth_generate_detailed(&SynthSpec::synth4_with(DEFAULT_SEPARATION, n_per_class, seed))?;
    m.set_labels(Some(fine))?;
    Ok(m)
}
