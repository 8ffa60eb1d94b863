use super::labels::{DialogAct, Label, Task};
use super::types::{Conversation, Speaker, Turn};
use crate::error::{Error, Result};
use crate::text::tokenize;

/// Which utterances of each turn become examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    User,
    Chatbot,
    Both,
}

impl Side {
    fn speakers(self) -> &'static [Speaker] {
        match self {
            Side::User => &[Speaker::User],
            Side::Chatbot => &[Speaker::Chatbot],
            Side::Both => &[Speaker::User, Speaker::Chatbot],
        }
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(Side::User),
            "chatbot" => Ok(Side::Chatbot),
            "both" => Ok(Side::Both),
            other => Err(Error::InvalidArgument(format!("unknown side `{other}`"))),
        }
    }
}

/// One labelled utterance together with the turns that precede it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationExample {
    pub conversation_id: String,
    pub turn_index: usize,
    pub speaker: Speaker,
    pub tokens: Vec<String>,
    pub label: Label,
    /// Strictly earlier turns, oldest first, at most the context window.
    pub context_turns: Vec<Turn>,
    pub gold_act: Option<DialogAct>,
    /// Gold keyword token positions (deduplicated, ascending).
    pub keyword_positions: Vec<usize>,
}

impl ClassificationExample {
    /// A user utterance with no planted keywords; in synthetic corpora these
    /// are the anaphoric fillers whose label comes from context.
    pub fn is_keywordless(&self) -> bool {
        self.keyword_positions.is_empty()
    }
}

/// Examples for every labelled utterance of `conv` on the requested side.
///
/// Utterances without a label, dialog acts marked `NotSet`, and utterances
/// that tokenize to nothing are skipped.
pub fn build_examples(
    conv: &Conversation,
    target: Task,
    side: Side,
    context_window: usize,
) -> Vec<ClassificationExample> {
    let mut out = Vec::new();
    for (i, turn) in conv.turns.iter().enumerate() {
        let start = i.saturating_sub(context_window);
        for &speaker in side.speakers() {
            let utt = turn.utterance(speaker);
            let label = match target {
                Task::Topic => utt.topic.map(Label::Topic),
                Task::DialogAct => utt
                    .dialog_act
                    .filter(|a| *a != DialogAct::NotSet)
                    .map(Label::Act),
            };
            let Some(label) = label else { continue };
            let tokens = tokenize(&utt.text);
            if tokens.is_empty() {
                continue;
            }
            out.push(ClassificationExample {
                conversation_id: conv.id.clone(),
                turn_index: i,
                speaker,
                tokens,
                label,
                context_turns: conv.turns[start..i].to_vec(),
                gold_act: utt.dialog_act,
                keyword_positions: utt.keyword_positions(),
            });
        }
    }
    out
}

pub fn build_all_examples(
    convs: &[Conversation],
    target: Task,
    side: Side,
    context_window: usize,
) -> Vec<ClassificationExample> {
    convs
        .iter()
        .flat_map(|c| build_examples(c, target, side, context_window))
        .collect()
}
