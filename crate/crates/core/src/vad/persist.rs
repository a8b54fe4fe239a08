//! JSON model files: `{version, dim, weights, bias, mean, std, metadata}`.
//!
//! Floats are written with the shortest representation that round-trips to
//! the same `f64`, so save/load is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LinearSvmModel;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileOut<'a> {
    version: u32,
    dim: usize,
    weights: &'a [f64],
    bias: f64,
    mean: &'a [f64],
    std: &'a [f64],
    metadata: &'a BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct ModelFileIn {
    version: u32,
    dim: usize,
    weights: Vec<f64>,
    bias: f64,
    mean: Vec<f64>,
    std: Vec<f64>,
    #[serde(default)]
    metadata: BTreeMap<String, serde_json::Value>,
    #[serde(flatten)]
    unknown: BTreeMap<String, serde_json::Value>,
}

pub fn model_to_json(model: &LinearSvmModel) -> Result<String> {
    let out = ModelFileOut {
        version: MODEL_FORMAT_VERSION,
        dim: model.dim(),
        weights: model.weights(),
        bias: model.bias(),
        mean: model.mean(),
        std: model.std(),
        metadata: model.metadata(),
    };
    serde_json::to_string_pretty(&out).map_err(|e| Error::Model(e.to_string()))
}

pub fn model_from_json(text: &str, context: &str) -> Result<LinearSvmModel> {
    let file: ModelFileIn =
        serde_json::from_str(text).map_err(|e| Error::parse(context, e.to_string()))?;
    for key in file.unknown.keys() {
        log::warn!("{context}: ignoring unknown model field `{key}`");
    }
    if file.version != MODEL_FORMAT_VERSION {
        return Err(Error::parse(
            context,
            format!("field `version`: unsupported model version {}", file.version),
        ));
    }
    for (name, len) in [
        ("weights", file.weights.len()),
        ("mean", file.mean.len()),
        ("std", file.std.len()),
    ] {
        if len != file.dim {
            return Err(Error::parse(
                context,
                format!("field `{name}` has {len} entries but dim is {}", file.dim),
            ));
        }
    }
    LinearSvmModel::new(file.weights, file.bias, file.mean, file.std)
        .map(|m| m.with_metadata(file.metadata))
        .map_err(|e| Error::parse(context, e.to_string()))
}

pub fn save_model(model: &LinearSvmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model_to_json(model)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LinearSvmModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LinearSvmModel {
        LinearSvmModel::new(
            vec![0.1, -2.5e-17, 3.0],
            -0.7,
            vec![1.0 / 3.0, 0.0, -9.75],
            vec![1.0, 0.2, 7.0],
        )
        .unwrap()
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("dyadsense-model-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.json");
        save_model(&model(), &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn missing_bias_is_parse_error_with_position() {
        let text = model_to_json(&model()).unwrap();
        let broken: String = text
            .lines()
            .filter(|l| !l.trim_start().starts_with("\"bias\""))
            .collect::<Vec<_>>()
            .join("\n");
        let err = model_from_json(&broken, "m.json").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(msg.contains("bias") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn unknown_fields_ignored() {
        let mut value: serde_json::Value = serde_json::from_str(&model_to_json(&model()).unwrap()).unwrap();
        value["trained_on"] = "tuesday".into();
        let m = model_from_json(&value.to_string(), "m.json").unwrap();
        assert_eq!(m, model());
    }

    #[test]
    fn dim_mismatch_rejected() {
        let mut value: serde_json::Value = serde_json::from_str(&model_to_json(&model()).unwrap()).unwrap();
        value["dim"] = 4.into();
        let msg = model_from_json(&value.to_string(), "m.json").unwrap_err().to_string();
        assert!(msg.contains("weights"), "{msg}");
    }
}
