use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, Standardizer};

use super::nn::{LayerSpec, Network};
use super::svm::SvmModel;
use super::{ModelBody, ModelFamily, TrainedModel, TrainingMetadata};

pub const ARTIFACT_VERSION: u32 = 1;
const FORMAT: &str = "voicing-model";

/// Little-endian f64 array, base64-encoded, with a SHA-256 of the raw bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Blob {
    len: usize,
    sha256: String,
    data: String,
}

impl Blob {
    fn encode(values: &[f64]) -> Self {
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            len: values.len(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            data: STANDARD.encode(&bytes),
        }
    }

    fn decode(&self, name: &str) -> Result<Vec<f64>> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Format(format!("blob `{name}` is not valid base64: {e}")))?;
        if hex::encode(Sha256::digest(&bytes)) != self.sha256 {
            return Err(Error::Format(format!("checksum mismatch in blob `{name}`")));
        }
        if bytes.len() != self.len * 8 {
            return Err(Error::Format(format!(
                "blob `{name}` holds {} bytes, expected {}",
                bytes.len(),
                self.len * 8
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap_or([0; 8])))
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SvmSection {
    n_support: usize,
    /// `[gamma, bias]`
    scalars: Blob,
    support_vectors: Blob,
    coef: Blob,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkSection {
    layers: Vec<LayerSpec>,
    params: Blob,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArtifactFile {
    format: String,
    version: u32,
    family: ModelFamily,
    features: FeatureKind,
    input_dims: usize,
    metadata: TrainingMetadata,
    standardizer_mean: Blob,
    standardizer_std: Blob,
    #[serde(skip_serializing_if = "Option::is_none")]
    svm: Option<SvmSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    network: Option<NetworkSection>,
}

impl TrainedModel {
    /// Versioned JSON; byte-identical for identical models.
    pub fn to_json(&self) -> Result<String> {
        let (svm, network) = match &self.body {
            ModelBody::Svm(m) => (
                Some(SvmSection {
                    n_support: m.support_vectors.len(),
                    scalars: Blob::encode(&[m.gamma, m.bias]),
                    support_vectors: Blob::encode(&m.support_vectors.concat()),
                    coef: Blob::encode(&m.coef),
                }),
                None,
            ),
            ModelBody::Network(n) => (
                None,
                Some(NetworkSection {
                    layers: n.specs.clone(),
                    params: Blob::encode(&n.params),
                }),
            ),
        };
        let file = ArtifactFile {
            format: FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            family: self.family,
            features: self.features,
            input_dims: self.input_dims(),
            metadata: self.metadata.clone(),
            standardizer_mean: Blob::encode(&self.standardizer.mean),
            standardizer_std: Blob::encode(&self.standardizer.std),
            svm,
            network,
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(text)?;
        if probe.get("format").and_then(|v| v.as_str()) != Some(FORMAT) {
            return Err(Error::Format("not a model artifact".into()));
        }
        let version = probe.get("version").and_then(|v| v.as_u64());
        if version != Some(u64::from(ARTIFACT_VERSION)) {
            return Err(Error::Format(format!(
                "unsupported artifact version {} (expected {ARTIFACT_VERSION})",
                version.map_or_else(|| "none".to_string(), |v| v.to_string())
            )));
        }
        let file: ArtifactFile = serde_json::from_value(probe)?;
        let standardizer = Standardizer {
            mean: file.standardizer_mean.decode("standardizer_mean")?,
            std: file.standardizer_std.decode("standardizer_std")?,
        };
        if standardizer.dims() != file.input_dims || standardizer.std.len() != file.input_dims {
            return Err(Error::Dimension {
                expected: file.input_dims,
                actual: standardizer.dims(),
            });
        }
        let body = match (file.family, file.svm, file.network) {
            (ModelFamily::Svm, Some(s), _) => {
                let scalars = s.scalars.decode("scalars")?;
                let flat = s.support_vectors.decode("support_vectors")?;
                let coef = s.coef.decode("coef")?;
                if scalars.len() != 2
                    || coef.len() != s.n_support
                    || flat.len() != s.n_support * file.input_dims
                {
                    return Err(Error::Format("inconsistent SVM section".into()));
                }
                ModelBody::Svm(SvmModel {
                    gamma: scalars[0],
                    bias: scalars[1],
                    support_vectors: flat
                        .chunks(file.input_dims.max(1))
                        .map(<[f64]>::to_vec)
                        .collect(),
                    coef,
                    iterations: 0,
                })
            }
            (ModelFamily::Mlp | ModelFamily::Cnn, _, Some(n)) => ModelBody::Network(
                Network::from_params(file.input_dims, &n.layers, n.params.decode("params")?)?,
            ),
            (family, _, _) => {
                return Err(Error::Format(format!(
                    "artifact lacks the {family} section"
                )))
            }
        };
        Ok(Self {
            family: file.family,
            features: file.features,
            standardizer,
            body,
            metadata: file.metadata,
        })
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainedModel::from_json(&text)
}
