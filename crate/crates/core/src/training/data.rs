use serde::{Deserialize, Serialize};

use crate::corpus::{ClassificationExample, Conversation, Task};
use crate::error::{Error, Result};
use crate::models::{act_one_hot, encode_turn, predict_dialog_act, DanModel, ModelInput};
use crate::text::{build_vocab, tokenize, Vocabulary};

/// Where a topic model's dialog-act feature comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActSource {
    None,
    /// One-hot gold act of the utterance.
    Gold,
    /// Distribution predicted by a separately trained act model.
    Predicted,
}

impl std::str::FromStr for ActSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ActSource::None),
            "gold" => Ok(ActSource::Gold),
            "predicted" => Ok(ActSource::Predicted),
            other => Err(Error::InvalidArgument(format!(
                "unknown act source `{other}`"
            ))),
        }
    }
}

/// A classification example mapped to token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub token_ids: Vec<u32>,
    /// Token ids of each previous turn, oldest first.
    pub context: Vec<Vec<u32>>,
    pub act: Option<Vec<f64>>,
    pub label: usize,
    pub task: Task,
}

impl EncodedExample {
    pub fn input(&self) -> ModelInput<'_> {
        let input = ModelInput::new(&self.token_ids).with_context(&self.context);
        match &self.act {
            Some(a) => input.with_act(a),
            None => input,
        }
    }
}

/// Vocabulary over every utterance of `convs`.
pub fn vocabulary_for(convs: &[Conversation], min_count: usize) -> Result<Vocabulary> {
    let tokens: Vec<String> = convs
        .iter()
        .flat_map(|c| &c.turns)
        .flat_map(|t| [&t.user.text, &t.chatbot.text])
        .flat_map(|text| tokenize(text))
        .collect();
    build_vocab(tokens.iter().map(String::as_str), min_count)
}

pub fn encode_example(
    ex: &ClassificationExample,
    vocab: &Vocabulary,
    acts: ActSource,
    act_model: Option<&DanModel>,
) -> Result<EncodedExample> {
    let mut out = EncodedExample {
        token_ids: vocab.encode(&ex.tokens),
        context: ex
            .context_turns
            .iter()
            .map(|t| encode_turn(t, vocab))
            .collect(),
        act: None,
        label: ex.label.index(),
        task: ex.label.task(),
    };
    out.act = match acts {
        ActSource::None => None,
        ActSource::Gold => Some(act_one_hot(ex.gold_act)),
        ActSource::Predicted => {
            let model = act_model.ok_or_else(|| {
                Error::InvalidArgument("predicted act features need an act model".into())
            })?;
            Some(predict_dialog_act(model, &out.input())?)
        }
    };
    Ok(out)
}

pub fn encode_examples(
    examples: &[ClassificationExample],
    vocab: &Vocabulary,
    acts: ActSource,
    act_model: Option<&DanModel>,
) -> Result<Vec<EncodedExample>> {
    examples
        .iter()
        .map(|e| encode_example(e, vocab, acts, act_model))
        .collect()
}
