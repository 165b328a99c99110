//! Versioned JSON model container.

use std::fs;
use std::path::Path;

use ae1svm_core::model::Ae1SvmModel;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureEncoding;
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// Column layout the model's inputs were encoded with.
    pub encoding: FeatureEncoding,
    pub model: Ae1SvmModel,
}

impl ModelFile {
    pub fn new(model: Ae1SvmModel, encoding: FeatureEncoding) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            encoding,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Argument(format!("model serialization failed: {e}")))
    }

    pub fn from_json(path: &Path, text: &str) -> Result<Self> {
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::data(path, format!("not a model file: {e}")))?;
        match probe.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(CliError::data(
                    path,
                    format!("unsupported model format version {v} (expected {FORMAT_VERSION})"),
                ))
            }
            None => return Err(CliError::data(path, "missing format_version")),
        }
        let file: ModelFile =
            serde_json::from_value(probe).map_err(|e| CliError::data(path, format!("invalid model file: {e}")))?;
        file.model
            .validate()
            .map_err(|e| CliError::data(path, format!("invalid model file: {e}")))?;
        if file.encoding.width() != file.model.input_dim() {
            return Err(CliError::data(
                path,
                format!(
                    "encoding describes {} features but the model expects {}",
                    file.encoding.width(),
                    file.model.input_dim()
                ),
            ));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(path, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ae1svm_core::model::ModelConfig;
    use ae1svm_core::Matrix;

    fn tiny() -> (ModelFile, Matrix) {
        let x = Matrix::from_fn(20, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 3.0 - 1.0);
        let cfg = ModelConfig {
            encoder_dims: vec![4, 2],
            num_features: 8,
            ..ModelConfig::default()
        };
        let model = Ae1SvmModel::for_data(&x, &cfg, 9).unwrap();
        let names = crate::dataset::default_feature_names(5);
        (ModelFile::new(model, FeatureEncoding::numeric(&names, None)), x)
    }

    #[test]
    fn round_trip_preserves_scores_bitwise() {
        let (mut file, x) = tiny();
        file.model
            .fit(&x, &ae1svm_core::model::TrainConfig { epochs: 3, batch_size: 4, ..Default::default() })
            .unwrap();
        let text = file.to_json().unwrap();
        let back = ModelFile::from_json(Path::new("m.json"), &text).unwrap();
        assert_eq!(back, file);
        let a: Vec<u64> = file.model.score(&x).unwrap().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.model.score(&x).unwrap().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn rejects_other_versions_and_broken_models() {
        let (file, _) = tiny();
        let mut v: serde_json::Value = serde_json::from_str(&file.to_json().unwrap()).unwrap();
        v["format_version"] = 7.into();
        let err = ModelFile::from_json(Path::new("m.json"), &v.to_string()).unwrap_err();
        assert!(err.to_string().contains("version 7"));

        let mut v: serde_json::Value = serde_json::from_str(&file.to_json().unwrap()).unwrap();
        v["model"]["alpha"] = (-1.0).into();
        let err = ModelFile::from_json(Path::new("m.json"), &v.to_string()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
