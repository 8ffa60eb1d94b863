//! Streaming prediction over whole conversations.
//!
//! Each conversation is replayed turn by turn. Before a turn is processed
//! the previous turns (at most the models' context window) are kept in a
//! rolling buffer; the act model labels each utterance from that buffer and
//! its distribution is handed to the topic model.

use std::collections::VecDeque;

use serde::Serialize;

use crate::corpus::{Conversation, Speaker, Task};
use crate::error::{Error, Result};
use crate::keywords::extract_keywords;
use crate::models::{
    act_one_hot, encode_turn, predict_dialog_act, Classifier, DanModel, ModelInput,
};
use crate::numerics::argmax;
use crate::text::{tokenize, Vocabulary};
use crate::training::{ActSource, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeywordToken {
    pub index: usize,
    pub token: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtterancePrediction {
    pub conversation_id: String,
    pub turn_index: usize,
    pub speaker: &'static str,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topic_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub act: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub act_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<KeywordToken>>,
}

impl UtterancePrediction {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("predictions always serialize")
    }
}

pub(crate) fn speaker_name(s: Speaker) -> &'static str {
    match s {
        Speaker::User => "user",
        Speaker::Chatbot => "chatbot",
    }
}

pub(crate) fn act_dan(m: &TrainedModel) -> Result<&DanModel> {
    m.expect_task(Task::DialogAct)?;
    match &m.model {
        Classifier::Dan(d) if !d.config.act_feature => Ok(d),
        _ => Err(Error::InvalidArgument(
            "the act model must be a DAN without an act feature".into(),
        )),
    }
}

pub(crate) fn check_vocab(topic: &Vocabulary, act: &Vocabulary) -> Result<()> {
    let (a, b) = (topic.hash(), act.hash());
    if a != b {
        return Err(Error::VocabMismatch(format!(
            "topic model vocabulary {a} differs from act model vocabulary {b}"
        )));
    }
    Ok(())
}

/// Topic, act and (for ADAN topic models) the top `j` keywords of every
/// non-empty utterance of `convs`, in conversation order.
pub fn pipeline_predict(
    topic: Option<&TrainedModel>,
    act: Option<&TrainedModel>,
    convs: &[Conversation],
    j: usize,
) -> Result<Vec<UtterancePrediction>> {
    let act_model = act.map(act_dan).transpose()?;
    if let Some(t) = topic {
        t.expect_task(Task::Topic)?;
        if let Some(a) = act {
            check_vocab(&t.vocab, &a.vocab)?;
        }
        if t.acts == ActSource::Predicted && act_model.is_none() {
            return Err(Error::InvalidArgument(
                "the topic model was trained on predicted acts; an act model is required".into(),
            ));
        }
    }
    let vocab = match (topic, act) {
        (Some(t), _) => &t.vocab,
        (None, Some(a)) => &a.vocab,
        (None, None) => {
            return Err(Error::InvalidArgument("no model to predict with".into()));
        }
    };
    let topic_window = topic.map_or(0, |t| t.model.config().window);
    let act_window = act_model.map_or(0, |a| a.config.window);
    let window = topic_window.max(act_window);

    let mut out = Vec::new();
    for conv in convs {
        let mut history: VecDeque<Vec<u32>> = VecDeque::with_capacity(window + 1);
        for (i, turn) in conv.turns.iter().enumerate() {
            assert!(history.len() <= window, "context window overflow");
            let past: Vec<Vec<u32>> = history.iter().cloned().collect();
            for speaker in [Speaker::User, Speaker::Chatbot] {
                let utt = turn.utterance(speaker);
                let tokens = tokenize(&utt.text);
                if tokens.is_empty() {
                    continue;
                }
                let ids = vocab.encode(&tokens);
                let mut pred = UtterancePrediction {
                    conversation_id: conv.id.clone(),
                    turn_index: i,
                    speaker: speaker_name(speaker),
                    text: utt.text.clone(),
                    topic: None,
                    topic_probability: None,
                    act: None,
                    act_probability: None,
                    keywords: None,
                };
                let mut act_dist = None;
                if let Some(a) = act_model {
                    let ctx = &past[past.len() - past.len().min(a.config.window)..];
                    let dist = predict_dialog_act(a, &ModelInput::new(&ids).with_context(ctx))?;
                    let k = argmax(&dist);
                    pred.act = Task::DialogAct.label_name(k).map(str::to_string);
                    pred.act_probability = Some(dist[k]);
                    act_dist = Some(dist);
                }
                if let Some(t) = topic {
                    let w = t.model.config().window;
                    let ctx = &past[past.len() - past.len().min(w)..];
                    let act_feature = match t.acts {
                        ActSource::None => None,
                        ActSource::Gold => Some(act_one_hot(utt.dialog_act)),
                        ActSource::Predicted => act_dist.clone(),
                    };
                    let mut input = ModelInput::new(&ids).with_context(ctx);
                    if let Some(f) = &act_feature {
                        input = input.with_act(f);
                    }
                    let dist = t.model.predict(&input)?;
                    let k = argmax(&dist);
                    pred.topic = Task::Topic.label_name(k).map(str::to_string);
                    pred.topic_probability = Some(dist[k]);
                    if let Some(adan) = t.model.as_adan() {
                        let kw = extract_keywords(adan, &input, j)?;
                        pred.keywords = Some(
                            kw.positions
                                .iter()
                                .zip(&kw.scores)
                                .map(|(&index, &score)| KeywordToken {
                                    index,
                                    token: tokens[index].clone(),
                                    score,
                                })
                                .collect(),
                        );
                    }
                }
                out.push(pred);
            }
            history.push_back(encode_turn(turn, vocab));
            if history.len() > window {
                history.pop_front();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Topic, Turn, Utterance};
    use crate::models::{ContextMode, Family, ModelConfig};
    use crate::text::build_vocab;
    use crate::training::{init_model, TrainConfig};

    fn vocab() -> Vocabulary {
        build_vocab(["tell", "me", "about", "football", "yes", "sure"], 1).unwrap()
    }

    fn trained(family: Family, task: Task, context: ContextMode, acts: ActSource) -> TrainedModel {
        let mut cfg = ModelConfig::defaults(family, task);
        cfg.embed_dim = 6;
        cfg.hidden = 4;
        cfg.context = context;
        cfg.act_feature = acts != ActSource::None;
        let mut tc = TrainConfig::new(cfg, 3);
        tc.acts = acts;
        let v = vocab();
        TrainedModel {
            model: init_model(&tc, &v).unwrap(),
            vocab: v,
            acts,
            train_config: Some(tc),
        }
    }

    fn long_conversation(n: usize) -> Conversation {
        Conversation {
            id: "long".into(),
            turns: (0..n)
                .map(|i| {
                    let u = if i % 2 == 0 {
                        "tell me about football"
                    } else {
                        "yes"
                    };
                    Turn::new(
                        Utterance::new(Speaker::User, u).with_topic(Topic::Sports),
                        Utterance::new(Speaker::Chatbot, "sure").with_topic(Topic::Sports),
                    )
                })
                .collect(),
            user_rating: None,
        }
    }

    #[test]
    fn twenty_turns_with_act_feed_and_keywords() {
        let topic = trained(
            Family::Adan,
            Task::Topic,
            ContextMode::Avg,
            ActSource::Predicted,
        );
        let act = trained(
            Family::Dan,
            Task::DialogAct,
            ContextMode::Avg,
            ActSource::None,
        );
        let convs = [long_conversation(20)];
        let preds = pipeline_predict(Some(&topic), Some(&act), &convs, 2).unwrap();
        assert_eq!(preds.len(), 40);
        for p in &preds {
            assert!(p.topic.is_some() && p.act.is_some());
            let kw = p.keywords.as_ref().unwrap();
            assert!(!kw.is_empty() && kw.len() <= 2);
        }
        let again = pipeline_predict(Some(&topic), Some(&act), &convs, 2).unwrap();
        assert_eq!(preds, again);
    }

    #[test]
    fn first_utterance_sees_no_context() {
        let topic = trained(Family::Dan, Task::Topic, ContextMode::Avg, ActSource::None);
        let convs = [long_conversation(3)];
        let preds = pipeline_predict(Some(&topic), None, &convs, 1).unwrap();
        let ids = topic.vocab.encode(&tokenize("tell me about football"));
        let direct = topic.model.predict(&ModelInput::new(&ids)).unwrap();
        let k = argmax(&direct);
        assert_eq!(preds[0].topic_probability, Some(direct[k]));
        assert!(preds[0].keywords.is_none());
    }

    #[test]
    fn vocabulary_hashes_must_match() {
        let topic = trained(
            Family::Dan,
            Task::Topic,
            ContextMode::None,
            ActSource::Predicted,
        );
        let mut act = trained(
            Family::Dan,
            Task::DialogAct,
            ContextMode::None,
            ActSource::None,
        );
        act.vocab = build_vocab(["other", "words"], 1).unwrap();
        let err = pipeline_predict(Some(&topic), Some(&act), &[long_conversation(2)], 1);
        assert!(matches!(err, Err(Error::VocabMismatch(_))));
    }

    #[test]
    fn predicted_acts_need_the_act_model() {
        let topic = trained(
            Family::Dan,
            Task::Topic,
            ContextMode::None,
            ActSource::Predicted,
        );
        assert!(pipeline_predict(Some(&topic), None, &[long_conversation(2)], 1).is_err());
        assert!(pipeline_predict(None, None, &[long_conversation(2)], 1).is_err());
    }
}
