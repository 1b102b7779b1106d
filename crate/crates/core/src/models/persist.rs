//! Model files: one JSON object with a format tag, a version number, the
//! header fields and the parameter payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::TrainedModel;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "camsight-model";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = model_to_json(model)?;
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

pub fn model_to_json(model: &TrainedModel) -> Result<String> {
    let file = ModelFile {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        model: model.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
    if v.get("format").and_then(Value::as_str) != Some(FORMAT_TAG) {
        return Err(Error::CorruptModel("missing model format tag".into()));
    }
    let version = v
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::CorruptModel("missing format version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::ModelVersion {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(v).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let m = file.model;
    if m.labels.len() < 2 || m.feature_names.is_empty() {
        return Err(Error::CorruptModel("model has no features or fewer than 2 labels".into()));
    }
    Ok(m)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    model_from_json(&text)
}
