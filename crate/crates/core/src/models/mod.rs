//! Classifiers: RBF-kernel SVM trained by SMO, and feed-forward / 1-D
//! convolutional networks trained with Adam and early stopping.

mod artifact;
pub mod nn;
pub mod svm;
mod train;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::{FeatureKind, Standardizer};

pub use artifact::{load_model, save_model, ARTIFACT_VERSION};
pub use nn::{Adam, AdamConfig, LayerSpec, Network};
pub use svm::{SvmConfig, SvmModel};
pub use train::{stratified_split, train, EarlyStopping, EpochRecord, TrainConfig, TrainingLog};

/// Per-class loss weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub voiced: f64,
    pub unvoiced: f64,
}

impl ClassWeights {
    pub fn uniform() -> Self {
        Self {
            voiced: 1.0,
            unvoiced: 1.0,
        }
    }

    /// `w_c = N / (2 N_c)`.
    pub fn from_counts(voiced: usize, unvoiced: usize) -> Result<Self> {
        if voiced == 0 || unvoiced == 0 {
            return Err(Error::invalid(format!(
                "class weights need both classes (voiced {voiced}, unvoiced {unvoiced})"
            )));
        }
        let n = (voiced + unvoiced) as f64;
        Ok(Self {
            voiced: n / (2.0 * voiced as f64),
            unvoiced: n / (2.0 * unvoiced as f64),
        })
    }

    pub fn from_labels(labels: &[Label]) -> Result<Self> {
        let voiced = labels.iter().filter(|l| l.is_voiced()).count();
        Self::from_counts(voiced, labels.len() - voiced)
    }

    pub fn of(&self, label: Label) -> f64 {
        if label.is_voiced() {
            self.voiced
        } else {
            self.unvoiced
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Svm,
    Mlp,
    Cnn,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Svm, ModelFamily::Mlp, ModelFamily::Cnn];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Svm => "svm",
            ModelFamily::Mlp => "mlp",
            ModelFamily::Cnn => "cnn",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown model family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub n_filters: usize,
    pub kernel_len: usize,
    pub pool_len: usize,
}

/// Convolution/pooling blocks followed by rectified dense layers and one output unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnConfig {
    pub conv_blocks: Vec<ConvBlock>,
    pub fc_sizes: Vec<usize>,
}

impl CnnConfig {
    /// Default topology for an input of `dims` values: wide kernels and
    /// pooling for full spectra, narrow ones for filterbank-sized inputs.
    pub fn for_input(dims: usize) -> Self {
        let block = |n_filters, kernel_len, pool_len| ConvBlock {
            n_filters,
            kernel_len,
            pool_len,
        };
        let conv_blocks = if dims >= 256 {
            vec![block(16, 9, 4), block(32, 5, 4)]
        } else {
            vec![block(16, 5, 2), block(32, 3, 2)]
        };
        Self {
            conv_blocks,
            fc_sizes: vec![64, 32],
        }
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut out = Vec::new();
        for b in &self.conv_blocks {
            out.push(LayerSpec::Conv1d {
                out_channels: b.n_filters,
                kernel: b.kernel_len,
            });
            out.push(LayerSpec::Relu);
            out.push(LayerSpec::MaxPool { size: b.pool_len });
        }
        out.extend(dense_stack(&self.fc_sizes));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
        }
    }
}

impl MlpConfig {
    pub fn layers(&self) -> Vec<LayerSpec> {
        dense_stack(&self.hidden)
    }
}

fn dense_stack(sizes: &[usize]) -> Vec<LayerSpec> {
    let mut out = Vec::new();
    for &out_size in sizes {
        out.push(LayerSpec::Dense { out: out_size });
        out.push(LayerSpec::Relu);
    }
    out.push(LayerSpec::Dense { out: 1 });
    out
}

/// Provenance stored with a trained model.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub corpus_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Svm(SvmModel),
    Network(Network),
}

/// A fitted standardizer plus classifier for one feature kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub family: ModelFamily,
    pub features: FeatureKind,
    pub standardizer: Standardizer,
    pub body: ModelBody,
    pub metadata: TrainingMetadata,
}

impl TrainedModel {
    pub fn input_dims(&self) -> usize {
        self.standardizer.dims()
    }

    /// Signed score: SVM decision value or network logit. Positive means voiced.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dims() {
            return Err(Error::Dimension {
                expected: self.input_dims(),
                actual: x.len(),
            });
        }
        let z = self.standardizer.transform(x)?;
        match &self.body {
            ModelBody::Svm(m) => Ok(m.decision(&z)),
            ModelBody::Network(n) => n.logit(&z),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(if self.score(x)? > 0.0 {
            Label::Voiced
        } else {
            Label::Unvoiced
        })
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Label>> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_weight_formula() {
        let w = ClassWeights::from_counts(56_269, 40_475).unwrap();
        assert!((w.voiced - 96_744.0 / 112_538.0).abs() < 1e-12);
        assert!((w.unvoiced - 96_744.0 / 80_950.0).abs() < 1e-12);
        assert!((w.voiced - 0.8597).abs() < 1e-4 && (w.unvoiced - 1.1951).abs() < 1e-4);
        assert_eq!(
            ClassWeights::from_counts(5, 5).unwrap(),
            ClassWeights::uniform()
        );
        let w = ClassWeights::from_counts(3, 1).unwrap();
        assert!((w.voiced - 2.0 / 3.0).abs() < 1e-12 && (w.unvoiced - 2.0).abs() < 1e-12);
        assert!(ClassWeights::from_labels(&[Label::Voiced, Label::Voiced]).is_err());
    }

    #[test]
    fn default_topologies_fit_their_inputs() {
        for dims in [40, 513] {
            let net = Network::new(dims, &CnnConfig::for_input(dims).layers(), 0).unwrap();
            assert!(net.logit(&vec![0.1; dims]).unwrap().is_finite());
        }
        for dims in [8, 13, 39, 40, 513] {
            assert!(Network::new(dims, &MlpConfig::default().layers(), 0).is_ok());
        }
    }
}
