use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::features::{FeatureKind, Standardizer};

use super::nn::{Adam, AdamConfig, Network};
use super::svm::{train_svm, SvmConfig, SvmModel};
use super::{
    ClassWeights, CnnConfig, MlpConfig, ModelBody, ModelFamily, TrainedModel, TrainingMetadata,
};

/// Minimum samples per class accepted by [`train`].
pub const MIN_PER_CLASS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub max_epochs: usize,
    pub patience: usize,
    pub dev_fraction: f64,
    pub batch_size: usize,
    /// Inverse-frequency class weights for the networks.
    pub class_weighting: bool,
    /// Inverse-frequency class weights for the SVM box bounds.
    pub svm_class_weighting: bool,
    /// Pick C and gamma from a small grid by dev F1.
    pub svm_grid: bool,
    pub svm: SvmConfig,
    pub adam: AdamConfig,
    pub mlp: MlpConfig,
    /// `None` picks the default topology for the input size.
    pub cnn: Option<CnnConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            max_epochs: 200,
            patience: 10,
            dev_fraction: 0.1,
            batch_size: 32,
            class_weighting: true,
            svm_class_weighting: false,
            svm_grid: false,
            svm: SvmConfig::default(),
            adam: AdamConfig::default(),
            mlp: MlpConfig::default(),
            cnn: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 0.5) {
            return Err(Error::invalid(format!(
                "dev_fraction must be in (0, 0.5), got {}",
                self.dev_fraction
            )));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::invalid(
                "patience, batch_size and max_epochs must be >= 1",
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Patience rule: stop after `patience` consecutive epochs without a new dev-loss minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_loss: f64,
    /// 1-based epoch of the best loss (0 before any observation).
    pub best_epoch: usize,
    pub wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Records the loss of `epoch`; returns true when training should stop.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.wait = 0;
        } else {
            self.wait += 1;
        }
        self.wait >= self.patience
    }

    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,dev_loss,dev_f1\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.8},{:.8},{:.6}",
                r.epoch, r.train_loss, r.dev_loss, r.dev_f1
            );
        }
        out
    }
}

/// Seeded stratified split; each class contributes `round(n_c * fraction)` dev samples.
/// Both index lists are sorted.
pub fn stratified_split(
    labels: &[Label],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut dev = Vec::new();
    for class in [Label::Voiced, Label::Unvoiced] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let n_dev = (idx.len() as f64 * fraction).round() as usize;
        if n_dev == 0 || n_dev >= idx.len() {
            return Err(Error::invalid(format!(
                "a {fraction} dev split of {} {class:?} samples leaves a class empty",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        dev.extend_from_slice(&idx[..n_dev]);
        train.extend_from_slice(&idx[n_dev..]);
    }
    train.sort_unstable();
    dev.sort_unstable();
    Ok((train, dev))
}

fn select<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn f1_of(pred: &[Label], truth: &[Label]) -> f64 {
    ConfusionMatrix::from_predictions(pred, truth).map_or(0.0, |m| m.f1_voiced())
}

/// Trains one model family on raw (unstandardized) feature rows.
///
/// The standardizer is fitted on all rows; a stratified dev split drives
/// early stopping (networks) or the C/gamma grid (SVM).
pub fn train(
    family: ModelFamily,
    features: FeatureKind,
    x: &[Vec<f64>],
    labels: &[Label],
    config: &TrainConfig,
) -> Result<(TrainedModel, TrainingLog)> {
    config.validate()?;
    if x.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} rows for {} labels",
            x.len(),
            labels.len()
        )));
    }
    if let Some(bad) = x.iter().find(|r| r.len() != features.dims()) {
        return Err(Error::Dimension {
            expected: features.dims(),
            actual: bad.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "training features contain non-finite values".into(),
        ));
    }
    let n_voiced = labels.iter().filter(|l| l.is_voiced()).count();
    if n_voiced < MIN_PER_CLASS || labels.len() - n_voiced < MIN_PER_CLASS {
        return Err(Error::invalid(format!(
            "training needs at least {MIN_PER_CLASS} samples per class (voiced {n_voiced}, unvoiced {})",
            labels.len() - n_voiced
        )));
    }
    let standardizer = Standardizer::fit(x)?;
    let z = standardizer.transform_all(x)?;
    let (train_idx, dev_idx) = stratified_split(labels, config.dev_fraction, config.seed)?;

    let (body, log) = match family {
        ModelFamily::Svm => {
            let (m, log) = fit_svm(&z, labels, &train_idx, &dev_idx, config)?;
            (ModelBody::Svm(m), log)
        }
        ModelFamily::Mlp | ModelFamily::Cnn => {
            let layers = if family == ModelFamily::Mlp {
                config.mlp.layers()
            } else {
                config
                    .cnn
                    .clone()
                    .unwrap_or_else(|| CnnConfig::for_input(features.dims()))
                    .layers()
            };
            let net = Network::new(features.dims(), &layers, config.seed)?;
            let (net, log) = fit_network(net, &z, labels, &train_idx, &dev_idx, config)?;
            (ModelBody::Network(net), log)
        }
    };
    let model = TrainedModel {
        family,
        features,
        standardizer,
        body,
        metadata: TrainingMetadata {
            seed: config.seed,
            config_hash: config.hash(),
            corpus_id: String::new(),
        },
    };
    Ok((model, log))
}

fn hinge(m: &SvmModel, x: &[Vec<f64>], labels: &[Label], idx: &[usize]) -> f64 {
    idx.iter()
        .map(|&i| (1.0 - labels[i].sign() * m.decision(&x[i])).max(0.0))
        .sum::<f64>()
        / idx.len().max(1) as f64
}

fn svm_predict(m: &SvmModel, x: &[Vec<f64>], idx: &[usize]) -> Vec<Label> {
    idx.iter()
        .map(|&i| {
            if m.decision(&x[i]) > 0.0 {
                Label::Voiced
            } else {
                Label::Unvoiced
            }
        })
        .collect()
}

fn fit_svm(
    z: &[Vec<f64>],
    labels: &[Label],
    train_idx: &[usize],
    dev_idx: &[usize],
    config: &TrainConfig,
) -> Result<(SvmModel, TrainingLog)> {
    let xt = select(z, train_idx);
    let yt = select(labels, train_idx);
    let dev_truth = select(labels, dev_idx);
    let weights = if config.svm_class_weighting {
        ClassWeights::from_labels(&yt)?
    } else {
        ClassWeights::uniform()
    };
    let mut candidates = vec![config.svm.clone()];
    if config.svm_grid {
        candidates.clear();
        for c in [0.1, 1.0, 10.0, 100.0] {
            for gamma in [1e-3, 1e-2, 1e-1, 1.0] {
                candidates.push(SvmConfig {
                    c,
                    gamma: Some(gamma),
                    ..config.svm.clone()
                });
            }
        }
    }
    let mut best: Option<(f64, SvmModel)> = None;
    for cand in &candidates {
        let m = train_svm(&xt, &yt, weights, cand)?;
        let f1 = f1_of(&svm_predict(&m, z, dev_idx), &dev_truth);
        if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
            best = Some((f1, m));
        }
    }
    let (dev_f1, model) = best.ok_or_else(|| Error::invalid("empty SVM grid"))?;
    let log = TrainingLog {
        records: vec![EpochRecord {
            epoch: 1,
            train_loss: hinge(&model, z, labels, train_idx),
            dev_loss: hinge(&model, z, labels, dev_idx),
            dev_f1,
        }],
        best_epoch: 1,
        stopped_early: false,
    };
    Ok((model, log))
}

fn fit_network(
    mut net: Network,
    z: &[Vec<f64>],
    labels: &[Label],
    train_idx: &[usize],
    dev_idx: &[usize],
    config: &TrainConfig,
) -> Result<(Network, TrainingLog)> {
    let weights = if config.class_weighting {
        ClassWeights::from_labels(&select(labels, train_idx))?
    } else {
        ClassWeights::uniform()
    };
    let dev_truth = select(labels, dev_idx);
    let mut opt = Adam::new(config.adam.clone(), net.n_params());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x05ee_d0fb_a7c4);
    let mut order = train_idx.to_vec();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = net.params.clone();
    let mut log = TrainingLog::default();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let (loss, grad) = net.loss_and_grad(z, labels, weights, batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite loss or gradient at epoch {epoch}"
                )));
            }
            opt.step(&mut net.params, &grad);
            train_loss += loss * batch.len() as f64;
        }
        train_loss /= order.len() as f64;
        let dev_loss = net.loss(z, labels, weights, dev_idx)?;
        let dev_pred: Vec<Label> = dev_idx
            .iter()
            .map(|&i| {
                net.logit(&z[i]).map(|s| {
                    if s > 0.0 {
                        Label::Voiced
                    } else {
                        Label::Unvoiced
                    }
                })
            })
            .collect::<Result<_>>()?;
        log.records.push(EpochRecord {
            epoch,
            train_loss,
            dev_loss,
            dev_f1: f1_of(&dev_pred, &dev_truth),
        });
        let stop = stopper.observe(epoch, dev_loss);
        if stopper.improved_at(epoch) {
            best_params.clone_from(&net.params);
        }
        if stop {
            log.stopped_early = true;
            break;
        }
    }
    net.params = best_params;
    log.best_epoch = stopper.best_epoch;
    Ok((net, log))
}
