//! Model serialization. JSON with shortest-round-trip float formatting,
//! so reloaded models score bit-identically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetectError, DetectorModel};

pub const FORMAT_VERSION: u32 = 1;

/// On-disk envelope around a fitted detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// Hash of the pipeline configuration that produced the model, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    pub model: DetectorModel,
}

pub fn save_model(
    path: &Path,
    model: &DetectorModel,
    config_hash: Option<&str>,
) -> Result<(), DetectError> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        config_hash: config_hash.map(str::to_owned),
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&file)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile, DetectError> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(DetectError::BadFormatVersion {
            found: file.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::super::tests::cluster_with_outlier;
    use super::super::{fit, DetectorParams};
    use super::*;
    use crate::detect::ocsvm::GammaSpec;

    fn roundtrip(params: DetectorParams) {
        let x = cluster_with_outlier(60, 17);
        let model = fit(x.view(), &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &model, Some("abc123")).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.config_hash.as_deref(), Some("abc123"));
        let before = model.score(x.view()).unwrap();
        let after = loaded.model.score(x.view()).unwrap();
        let bits = |v: &[f64]| v.iter().map(|s| s.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&before), bits(&after));
        assert_eq!(model.threshold.to_bits(), loaded.model.threshold.to_bits());
    }

    #[test]
    fn iforest_round_trip_scores_bit_exact() {
        roundtrip(DetectorParams::IForest {
            n_trees: 25,
            subsample: 32,
            contamination: 0.05,
            seed: 3,
        });
    }

    #[test]
    fn lof_round_trip_scores_bit_exact() {
        roundtrip(DetectorParams::Lof {
            k: 5,
            contamination: 0.05,
        });
    }

    #[test]
    fn ocsvm_round_trip_scores_bit_exact() {
        roundtrip(DetectorParams::OcSvm {
            nu: 0.1,
            gamma: GammaSpec::Scale,
            tol: 1e-4,
            max_iter: 1000,
        });
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let x = cluster_with_outlier(30, 2);
        let model = fit(
            x.view(),
            &DetectorParams::Lof {
                k: 3,
                contamination: 0.1,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &model, None).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        std::fs::write(&path, text).unwrap();
        match load_model(&path) {
            Err(DetectError::BadFormatVersion { found: 99, .. }) => {}
            other => panic!("expected BadFormatVersion, got {other:?}"),
        }
    }
}
