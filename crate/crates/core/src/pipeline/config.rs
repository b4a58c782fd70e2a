use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SynthSpec;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureKind};
use crate::models::{ModelFamily, TrainConfig};

/// One corpus: a directory of `<id>.wav` + `<id>.phn` pairs (searched recursively).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub dir: PathBuf,
    /// Phone class map file; the built-in English map when absent.
    #[serde(default)]
    pub phone_map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_corpus: String,
    /// Corpus the trained model is first evaluated on; defaults to `train_corpus`.
    #[serde(default)]
    pub reference_corpus: Option<String>,
    #[serde(default)]
    pub test_corpora: Vec<String>,
    #[serde(default = "default_variant")]
    pub variant: FeatureKind,
    #[serde(default = "default_model")]
    pub model: ModelFamily,
}

fn default_variant() -> FeatureKind {
    FeatureKind::Cues
}

fn default_model() -> ModelFamily {
    ModelFamily::Svm
}

/// Whole-run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads for per-utterance work; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub corpora: BTreeMap<String, CorpusConfig>,
    /// Synthetic corpora, written to the directory of the corpus with the same id.
    #[serde(default)]
    pub synth: BTreeMap<String, SynthSpec>,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Directory relative paths resolve against (the config file's directory).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seed() -> u64 {
    7
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut config: Self = raw
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        // synthetic corpora without an explicit seed derive one from the run seed
        for (id, spec) in config.synth.iter_mut() {
            let explicit = raw
                .get("synth")
                .and_then(|s| s.get(id))
                .and_then(|s| s.get("seed"))
                .is_some();
            if !explicit {
                spec.seed = derive_seed(config.seed, id);
            }
        }
        config.train.seed = config.seed;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    /// Overrides the run seed everywhere it propagates.
    pub fn set_seed(&mut self, seed: u64) {
        let old = self.seed;
        self.seed = seed;
        self.train.seed = seed;
        for (id, spec) in self.synth.iter_mut() {
            if spec.seed == derive_seed(old, id) {
                spec.seed = derive_seed(seed, id);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let exp = &self.experiment;
        let mut ids = vec![&exp.train_corpus];
        ids.extend(exp.reference_corpus.iter());
        ids.extend(exp.test_corpora.iter());
        for id in ids {
            if !self.corpora.contains_key(id) {
                return Err(Error::Config(format!(
                    "experiment names corpus `{id}` but [corpora.{id}] is missing"
                )));
            }
        }
        for id in self.synth.keys() {
            if !self.corpora.contains_key(id) {
                return Err(Error::Config(format!(
                    "[synth.{id}] needs a matching [corpora.{id}] entry"
                )));
            }
        }
        for spec in self.synth.values() {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        self.train
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.features
            .mfcc
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.features
            .cues
            .pitch
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn corpus(&self, id: &str) -> Result<&CorpusConfig> {
        self.corpora
            .get(id)
            .ok_or_else(|| Error::Config(format!("unknown corpus `{id}`")))
    }

    pub fn reference_corpus(&self) -> &str {
        self.experiment
            .reference_corpus
            .as_deref()
            .unwrap_or(&self.experiment.train_corpus)
    }

    /// Corpora the experiment touches, in train, reference, test order, without repeats.
    pub fn experiment_corpora(&self) -> Vec<String> {
        let mut out = vec![self.experiment.train_corpus.clone()];
        for id in std::iter::once(self.reference_corpus())
            .chain(self.experiment.test_corpora.iter().map(String::as_str))
        {
            if !out.iter().any(|o| o == id) {
                out.push(id.to_string());
            }
        }
        out
    }

    /// SHA-256 of everything that can change outputs (paths, `jobs` and `out_dir` excluded).
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            seed: u64,
            synth: &'a BTreeMap<String, SynthSpec>,
            experiment: &'a ExperimentConfig,
            features: &'a FeatureConfig,
            train: &'a TrainConfig,
        }
        let json = serde_json::to_string(&Hashed {
            seed: self.seed,
            synth: &self.synth,
            experiment: &self.experiment,
            features: &self.features,
            train: &self.train,
        })
        .unwrap_or_default();
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Per-corpus seed derived from the run seed and the corpus id.
pub fn derive_seed(seed: u64, id: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap_or([0; 8]))
}
