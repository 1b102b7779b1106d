//! Traffic-category classifier gated into a camera-model classifier.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schema::LabelSchema;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::metrics::{evaluate, Evaluation};
use crate::models::{train_with_labels, ModelSpec, TrainedModel};
use crate::xai::{Attribution, Explainer, Method};

/// Stage-2 placeholder in end-to-end evaluation for camera rows the first
/// stage did not pass through the gate.
pub const NOT_GATED: &str = "(not IoTCam)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub schema: LabelSchema,
    pub stage1: TrainedModel,
    pub stage2: TrainedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStagePrediction {
    pub stage1: String,
    pub stage2: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1_attribution: Option<Attribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage2_attribution: Option<Attribution>,
}

/// One explainer per stage, each built from that stage's training rows.
#[derive(Debug, Clone)]
pub struct PipelineExplainers {
    pub stage1: Explainer,
    pub stage2: Explainer,
}

impl PipelineModel {
    /// `m` carries fine labels: camera models for camera rows, the traffic
    /// category otherwise. Stage 1 sees every row with its category, stage 2
    /// only the camera rows.
    pub fn train(m: &FeatureMatrix, spec1: &ModelSpec, spec2: &ModelSpec, schema: &LabelSchema) -> Result<Self> {
        schema.validate()?;
        let labels = m.require_labels()?;
        let coarse = labels.iter().map(|l| schema.coarse(l)).collect::<Result<Vec<_>>>()?;
        let mut m1 = m.clone();
        m1.set_labels(Some(coarse))?;
        let stage1 = train_with_labels(spec1, &m1, &schema.stage1)?;

        let cams: Vec<usize> = (0..labels.len()).filter(|&i| schema.is_stage2(&labels[i])).collect();
        if cams.is_empty() {
            return Err(Error::invalid("no rows carry a camera-model label for stage 2"));
        }
        let mut m2 = m.select_rows(&cams);
        m2.set_labels(Some(cams.iter().filter_map(|&i| schema.fine(&labels[i])).collect()))?;
        let stage2 = train_with_labels(spec2, &m2, &schema.stage2)?;
        debug_assert_eq!(stage1.feature_names, stage2.feature_names);
        Ok(PipelineModel {
            schema: schema.clone(),
            stage1,
            stage2,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.stage1.feature_names
    }

    pub fn explainers(&self, m: &FeatureMatrix, method: Method, n_background: usize, seed: u64) -> Result<PipelineExplainers> {
        let labels = m.require_labels()?;
        let aligned = self.stage1.align(m)?;
        let cams: Vec<usize> = (0..labels.len()).filter(|&i| self.schema.is_stage2(&labels[i])).collect();
        let stage1 = Explainer::from_training(method, &aligned, n_background, seed)?;
        let stage2 = Explainer::from_training(method, &aligned.select_rows(&cams), n_background, seed)?;
        stage1.check_model(&self.stage1)?;
        stage2.check_model(&self.stage2)?;
        Ok(PipelineExplainers { stage1, stage2 })
    }

    /// Predictions for every row of `m` (columns aligned by name).
    pub fn classify_matrix(&self, m: &FeatureMatrix, explain: Option<&PipelineExplainers>) -> Result<Vec<TwoStagePrediction>> {
        let aligned = self.stage1.align(m)?;
        aligned
            .rows()
            .par_iter()
            .enumerate()
            .map(|(i, r)| two_stage_classify(self, r, explain, i))
            .collect()
    }
}

/// Stage 2 runs exactly when stage 1 predicts the gate label. With
/// explainers, each stage's predicted class is explained.
pub fn two_stage_classify(
    p: &PipelineModel,
    row: &[f64],
    explain: Option<&PipelineExplainers>,
    instance: usize,
) -> Result<TwoStagePrediction> {
    if row.len() != p.stage1.n_features() {
        return Err(Error::WidthMismatch {
            expected: p.stage1.n_features(),
            actual: row.len(),
        });
    }
    let c1 = p.stage1.predict_index(row);
    let stage1 = p.stage1.labels[c1].clone();
    let stage1_attribution = explain
        .map(|e| e.stage1.explain(&p.stage1, row, c1, instance))
        .transpose()?;
    let (stage2, stage2_attribution) = if stage1 == p.schema.gate {
        let c2 = p.stage2.predict_index(row);
        let a = explain
            .map(|e| e.stage2.explain(&p.stage2, row, c2, instance))
            .transpose()?;
        (Some(p.stage2.labels[c2].clone()), a)
    } else {
        (None, None)
    };
    Ok(TwoStagePrediction {
        stage1,
        stage2,
        stage1_attribution,
        stage2_attribution,
    })
}

/// Stage-1 metrics plus three views of stage 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEvaluation {
    pub stage1: Evaluation,
    /// Camera rows that stage 1 passed through the gate.
    pub stage2_conditioned: Option<Evaluation>,
    /// Every camera row; rows stopped by stage 1 count as [`NOT_GATED`].
    pub stage2_end_to_end: Option<Evaluation>,
    /// Stage 2 applied directly to every camera row.
    pub stage2_ground_truth: Option<Evaluation>,
    pub gating_violations: usize,
}

pub fn evaluate_pipeline(p: &PipelineModel, test: &FeatureMatrix) -> Result<PipelineEvaluation> {
    let labels = test.require_labels()?;
    let preds = p.classify_matrix(test, None)?;
    let coarse = labels.iter().map(|l| p.schema.coarse(l)).collect::<Result<Vec<_>>>()?;
    let s1: Vec<&str> = preds.iter().map(|x| x.stage1.as_str()).collect();
    let stage1 = evaluate(&coarse.iter().map(String::as_str).collect::<Vec<_>>(), &s1, &p.schema.stage1)?;
    let gating_violations = preds
        .iter()
        .filter(|x| (x.stage1 == p.schema.gate) != x.stage2.is_some())
        .count();

    let cams: Vec<usize> = (0..labels.len()).filter(|&i| p.schema.is_stage2(&labels[i])).collect();
    let truth = |idx: &[usize]| -> Vec<String> { idx.iter().filter_map(|&i| p.schema.fine(&labels[i])).collect() };
    let eval_or_none = |t: Vec<String>, pr: Vec<String>, alphabet: &[String]| -> Result<Option<Evaluation>> {
        if t.is_empty() {
            Ok(None)
        } else {
            evaluate(&t, &pr, alphabet).map(Some)
        }
    };

    let gated: Vec<usize> = cams.iter().copied().filter(|&i| preds[i].stage2.is_some()).collect();
    let stage2_conditioned = eval_or_none(
        truth(&gated),
        gated.iter().map(|&i| preds[i].stage2.clone().expect("gated")).collect(),
        &p.schema.stage2,
    )?;

    let mut e2e_alphabet = p.schema.stage2.clone();
    e2e_alphabet.push(NOT_GATED.to_string());
    let stage2_end_to_end = eval_or_none(
        truth(&cams),
        cams.iter()
            .map(|&i| preds[i].stage2.clone().unwrap_or_else(|| NOT_GATED.to_string()))
            .collect(),
        &e2e_alphabet,
    )?;

    let aligned = p.stage2.align(test)?;
    let rows: Vec<Vec<f64>> = cams.iter().map(|&i| aligned.row(i).to_vec()).collect();
    let stage2_ground_truth = eval_or_none(truth(&cams), p.stage2.predict(&rows)?, &p.schema.stage2)?;

    Ok(PipelineEvaluation {
        stage1,
        stage2_conditioned,
        stage2_end_to_end,
        stage2_ground_truth,
        gating_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::pipeline::{split, synth_two_stage};

    fn fixture() -> (PipelineModel, FeatureMatrix) {
        let m = synth_two_stage(240, 4).unwrap();
        let (tr, te) = split(&m, 0.8, 4, true).unwrap();
        let spec = ModelSpec::new(ModelKind::DT).with_seed(1);
        let p = PipelineModel::train(&tr, &spec, &spec, &LabelSchema::default()).unwrap();
        (p, te)
    }

    #[test]
    fn gating_and_accuracy() {
        let (p, te) = fixture();
        let e = evaluate_pipeline(&p, &te).unwrap();
        assert_eq!(e.gating_violations, 0);
        assert!(e.stage1.macro_avg.micro_accuracy > 0.95);
        assert!(e.stage2_conditioned.unwrap().macro_avg.micro_accuracy > 0.95);
        assert_eq!(p.stage1.feature_names, p.stage2.feature_names);
        assert_eq!(p.stage2.labels.len(), 6);
    }

    #[test]
    fn explained_prediction_attaches_stage_attributions() {
        let (p, te) = fixture();
        let ex = p.explainers(&te, Method::Tree, 10, 0).unwrap();
        let preds = p.classify_matrix(&te, Some(&ex)).unwrap();
        for x in &preds {
            assert!(x.stage1_attribution.is_some());
            assert_eq!(x.stage2.is_some(), x.stage2_attribution.is_some());
            if let Some(a) = &x.stage2_attribution {
                assert_eq!(a.class.as_deref(), x.stage2.as_deref());
            }
        }
    }

    #[test]
    fn width_checked() {
        let (p, _) = fixture();
        assert!(matches!(
            two_stage_classify(&p, &[0.0; 3], None, 0),
            Err(Error::WidthMismatch { .. })
        ));
    }
}
