//! Training loop, evaluation and the model file format.
//!
//! Training shuffles the training examples each epoch, accumulates the mean
//! gradient over batches of examples processed one at a time, and takes one
//! ADAM step per batch. Dev accuracy is measured after every epoch; training
//! stops once it has failed to strictly improve for `patience` epochs, and
//! the parameters from the best epoch are returned.

mod data;
mod evaluate;
mod persist;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Classifier, Family, ModelConfig};
use crate::numerics::{adam_step, AdamConfig, RngStream};
use crate::text::{init_embeddings, EmbeddingSource, Vocabulary};

pub use data::{encode_example, encode_examples, vocabulary_for, ActSource, EncodedExample};
pub use evaluate::{evaluate, Evaluation};
pub use persist::{
    load_model, model_from_bytes, model_to_bytes, save_model, TrainedModel, FORMAT_VERSION, MAGIC,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub acts: ActSource,
    pub embeddings: EmbeddingSource,
    pub min_count: usize,
    pub seed: u64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl TrainConfig {
    /// Learning rate 0.001, batches of 32, at most 50 epochs, patience 2,
    /// embeddings drawn uniformly from +-0.1.
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        TrainConfig {
            acts: if model.act_feature {
                ActSource::Predicted
            } else {
                ActSource::None
            },
            model,
            embeddings: EmbeddingSource::Random { seed, scale: 0.1 },
            min_count: 1,
            seed,
            lr: 0.001,
            batch_size: 32,
            max_epochs: 50,
            patience: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidArgument(
                "batch size, max epochs and patience must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {}", self.lr)));
        }
        if self.model.family == Family::Bilstm
            && matches!(self.embeddings, EmbeddingSource::Pretrained { .. })
        {
            return Err(Error::InvalidArgument(
                "BiLSTM embeddings are learned from a random start; pretrained vectors apply to DAN and ADAN".into(),
            ));
        }
        if self.model.act_feature != (self.acts != ActSource::None) {
            return Err(Error::InvalidArgument(
                "act feature flag and act source disagree".into(),
            ));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub selected_epoch: usize,
    pub wall_time_secs: f64,
}

impl TrainHistory {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("history always serializes")
    }
}

/// Outcome of feeding one epoch's dev accuracy to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
            epoch: 0,
        }
    }

    pub fn observe(&mut self, dev_accuracy: f64) -> StopDecision {
        self.epoch += 1;
        if self.best.is_none_or(|b| dev_accuracy > b) {
            self.best = Some(dev_accuracy);
            self.best_epoch = self.epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Fresh model for `cfg` over `vocab`.
pub fn init_model(cfg: &TrainConfig, vocab: &Vocabulary) -> Result<Classifier> {
    cfg.validate()?;
    let emb = init_embeddings(vocab, &cfg.embeddings, cfg.model.embed_dim)?;
    Classifier::new(cfg.model.clone(), emb, cfg.seed)
}

/// Train a fresh model; dev accuracy drives early stopping.
pub fn train(
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    train: &[EncodedExample],
    dev: &[EncodedExample],
) -> Result<(Classifier, TrainHistory)> {
    if dev.is_empty() {
        return Err(Error::InvalidArgument("empty dev split".into()));
    }
    let model = init_model(cfg, vocab)?;
    train_with_scorer(model, cfg, train, |m| Ok(evaluate(m, dev)?.accuracy))
}

/// Training loop with an arbitrary per-epoch dev score (higher is better).
pub fn train_with_scorer<F>(
    mut model: Classifier,
    cfg: &TrainConfig,
    train: &[EncodedExample],
    mut dev_score: F,
) -> Result<(Classifier, TrainHistory)>
where
    F: FnMut(&Classifier) -> Result<f64>,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    let task = model.config().task;
    if let Some(bad) = train.iter().find(|e| e.task != task) {
        return Err(Error::LabelSpace(format!(
            "{:?} example for a {task:?} model",
            bad.task
        )));
    }
    let start = Instant::now();
    let adam = cfg.adam();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = RngStream::derived(cfg.seed, 0x5ff);
    let mut dropout_rng = RngStream::derived(cfg.seed, 0xd50);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut epochs = Vec::new();
    model.zero_grad();

    for epoch in 1..=cfg.max_epochs {
        shuffle_rng.shuffle(&mut order);
        let mut total_loss = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let weight = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let ex = &train[i];
                let loss = model
                    .loss_and_accumulate(&ex.input(), ex.label, weight, &mut dropout_rng)
                    .map_err(|e| {
                        if e.is_numeric() {
                            Error::Divergence {
                                epoch,
                                batch: batch + 1,
                            }
                        } else {
                            e
                        }
                    })?;
                total_loss += loss;
            }
            optimizer_step(&mut model, &adam);
        }
        let dev_accuracy = dev_score(&model)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: total_loss / train.len() as f64,
            dev_accuracy,
        });
        match stopper.observe(dev_accuracy) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    Ok((
        best,
        TrainHistory {
            epochs,
            selected_epoch: stopper.best_epoch(),
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// One ADAM step on every trainable parameter; frozen embeddings only have
/// their gradient cleared.
fn optimizer_step(model: &mut Classifier, adam: &AdamConfig) {
    let trainable = model.embeddings().trainable;
    for (name, p) in model.parameters_mut() {
        if name == "embeddings" && !trainable {
            p.zero_grad();
        } else {
            adam_step(p, adam);
        }
    }
}
