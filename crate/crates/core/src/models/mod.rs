//! Classifier families and the context features they consume.
//!
//! * [`DanModel`]: averaged word embeddings, optionally extended with the
//!   averaged previous-turn vector and a dialog-act distribution, fed through
//!   one ReLU layer and a softmax.
//! * [`AdanModel`]: a `K x |V|` topic-word attention table produces one
//!   attention-weighted sentence vector per label; a shared dense stack
//!   scores each of them to one logit.
//! * [`BiLstmModel`]: final forward and backward LSTM states, with context
//!   appended to each timestep (`avg`) or prepended as extra timesteps (`seq`).
//!
//! All three consume a [`ModelInput`] and run their own hand-written
//! backward pass; gradients flow into the embedding table through both the
//! utterance and its context turns.

mod adan;
mod bilstm;
mod classifier;
mod context;
mod dan;

use serde::{Deserialize, Serialize};

use crate::corpus::{DialogAct, Task};
use crate::error::{Error, Result};
use crate::text::EmbeddingMatrix;

pub use adan::{adan_forward, AdanModel};
pub use bilstm::{bilstm_forward, BiLstmModel};
pub use classifier::{predict_dialog_act, Classifier};
pub use context::{
    act_one_hot, build_context, build_turn_vector, context_vector, encode_turn, mean_embedding,
    ContextFeature,
};
pub use dan::{dan_forward, DanModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Dan,
    Adan,
    Bilstm,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dan" => Ok(Family::Dan),
            "adan" => Ok(Family::Adan),
            "bilstm" => Ok(Family::Bilstm),
            other => Err(Error::InvalidArgument(format!(
                "unknown model family `{other}`"
            ))),
        }
    }
}

/// How previous turns enter a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    None,
    /// Averaged turn vector appended to the model input.
    Avg,
    /// Individual turn vectors as extra leading timesteps (BiLSTM only).
    Seq,
}

impl std::str::FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ContextMode::None),
            "avg" => Ok(ContextMode::Avg),
            "seq" => Ok(ContextMode::Seq),
            other => Err(Error::InvalidArgument(format!(
                "unknown context mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: Family,
    pub task: Task,
    pub embed_dim: usize,
    /// Dense hidden width (DAN/ADAN) or LSTM state size per direction.
    pub hidden: usize,
    pub context: ContextMode,
    pub act_feature: bool,
    /// Maximum number of previous turns accepted as context.
    pub window: usize,
    pub dropout: f64,
}

impl ModelConfig {
    /// Embedding 300; hidden 500 for the averaging networks, 256 per LSTM
    /// direction; 50% dropout; five turns of context.
    pub fn defaults(family: Family, task: Task) -> Self {
        ModelConfig {
            family,
            task,
            embed_dim: 300,
            hidden: match family {
                Family::Dan | Family::Adan => 500,
                Family::Bilstm => 256,
            },
            context: ContextMode::None,
            act_feature: false,
            window: 5,
            dropout: 0.5,
        }
    }

    pub fn num_labels(&self) -> usize {
        self.task.num_labels()
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(
                "model dimensions must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.context == ContextMode::Seq && self.family != Family::Bilstm {
            return Err(Error::InvalidArgument(
                "sequential context is only defined for the BiLSTM".into(),
            ));
        }
        Ok(())
    }

    fn act_dim(&self) -> usize {
        if self.act_feature {
            DialogAct::count()
        } else {
            0
        }
    }
}

/// One utterance to classify, as token ids, plus its context.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a> {
    pub token_ids: &'a [u32],
    /// Token ids of each previous turn, oldest first.
    pub context: &'a [Vec<u32>],
    /// Precomputed averaged turn vector; takes precedence over `context` in
    /// `avg` mode and receives no gradient.
    pub turn_context: Option<&'a [f64]>,
    pub act: Option<&'a [f64]>,
}

impl<'a> ModelInput<'a> {
    pub fn new(token_ids: &'a [u32]) -> Self {
        ModelInput {
            token_ids,
            context: &[],
            turn_context: None,
            act: None,
        }
    }

    /// Input whose context comes from an already built [`ContextFeature`].
    pub fn from_feature(token_ids: &'a [u32], feature: &'a ContextFeature) -> Self {
        ModelInput {
            token_ids,
            context: &[],
            turn_context: Some(&feature.turn_context),
            act: feature.act_feature.as_deref(),
        }
    }

    pub fn with_context(mut self, context: &'a [Vec<u32>]) -> Self {
        self.context = context;
        self
    }

    pub fn with_act(mut self, act: &'a [f64]) -> Self {
        self.act = Some(act);
        self
    }

    /// Checks the input against a model configuration and vocabulary size;
    /// returns the act feature when the model consumes one.
    pub(crate) fn validate(
        &self,
        cfg: &ModelConfig,
        vocab_size: usize,
    ) -> Result<Option<&'a [f64]>> {
        if self.token_ids.is_empty() {
            return Err(Error::InvalidArgument("empty utterance".into()));
        }
        if self.context.len() > cfg.window {
            return Err(Error::InvalidArgument(format!(
                "{} context turns for a window of {}",
                self.context.len(),
                cfg.window
            )));
        }
        let out_of_range = self
            .token_ids
            .iter()
            .chain(self.context.iter().flatten())
            .any(|&id| id as usize >= vocab_size);
        if out_of_range {
            return Err(Error::Shape(format!(
                "token id outside vocabulary of {vocab_size}"
            )));
        }
        if let Some(tc) = self.turn_context {
            if tc.len() != cfg.embed_dim {
                return Err(Error::Shape(format!(
                    "turn context of length {}, expected {}",
                    tc.len(),
                    cfg.embed_dim
                )));
            }
        }
        if !cfg.act_feature {
            return Ok(None);
        }
        let act = self
            .act
            .ok_or_else(|| Error::InvalidArgument("model expects a dialog-act feature".into()))?;
        context::check_act_feature(act)?;
        Ok(Some(act))
    }
}

/// Averaged context vector for `avg` mode.
pub(crate) fn avg_context(input: &ModelInput, emb: &EmbeddingMatrix) -> Vec<f64> {
    match input.turn_context {
        Some(tc) => tc.to_vec(),
        None => context::context_vector(emb, input.context),
    }
}

pub(crate) fn avg_context_backward(input: &ModelInput, emb: &mut EmbeddingMatrix, grad: &[f64]) {
    if input.turn_context.is_none() {
        context::context_vector_backward(emb, input.context, grad);
    }
}

/// Glorot-uniform bound for a `rows x cols` weight matrix.
pub(crate) fn glorot(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}
