//! Line-delimited JSON corpus files: one conversation per line.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::labels::{DialogAct, Topic};
use super::types::{Conversation, KeywordSpan, ResponseRatings, Speaker, Turn, Utterance};
use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConversationRecord {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rating: Option<f64>,
    turns: Vec<TurnRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnRecord {
    user: UtteranceRecord,
    chatbot: UtteranceRecord,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceRecord {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    topic: Option<Topic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dialog_act: Option<DialogAct>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    keywords: Vec<KeywordRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ratings: Option<RatingsRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeywordRecord {
    index: usize,
    topic: Topic,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatingsRecord {
    comprehensible: u8,
    relevant: u8,
    interesting: u8,
    #[serde(rename = "continue")]
    continue_conversation: u8,
}

fn schema(line: usize, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

fn utterance_from_record(
    rec: UtteranceRecord,
    speaker: Speaker,
    line: usize,
    field: &str,
) -> Result<Utterance> {
    let n_tokens = tokenize(&rec.text).len();
    let mut keyword_spans = Vec::with_capacity(rec.keywords.len());
    for kw in rec.keywords {
        if kw.index >= n_tokens {
            return Err(schema(
                line,
                format!(
                    "{field}.keywords: index {} out of range for {n_tokens} tokens",
                    kw.index
                ),
            ));
        }
        keyword_spans.push(KeywordSpan {
            token_index: kw.index,
            topic: kw.topic,
        });
    }
    let ratings = match rec.ratings {
        None => None,
        Some(_) if speaker == Speaker::User => {
            return Err(schema(
                line,
                format!("{field}.ratings: only chatbot responses carry ratings"),
            ));
        }
        Some(r) => {
            for (name, v) in [
                ("comprehensible", r.comprehensible),
                ("relevant", r.relevant),
                ("interesting", r.interesting),
                ("continue", r.continue_conversation),
            ] {
                if v > 1 {
                    return Err(schema(
                        line,
                        format!("{field}.ratings.{name}: {v} is not 0 or 1"),
                    ));
                }
            }
            Some(ResponseRatings {
                comprehensible: r.comprehensible,
                relevant: r.relevant,
                interesting: r.interesting,
                continue_conversation: r.continue_conversation,
            })
        }
    };
    Ok(Utterance {
        speaker,
        text: rec.text,
        topic: rec.topic,
        dialog_act: rec.dialog_act,
        keyword_spans,
        ratings,
    })
}

fn conversation_from_record(rec: ConversationRecord, line: usize) -> Result<Conversation> {
    if rec.turns.is_empty() {
        return Err(schema(line, "turns: conversation has no turns"));
    }
    if let Some(r) = rec.rating {
        if !(1.0..=5.0).contains(&r) {
            return Err(schema(line, format!("rating: {r} outside [1, 5]")));
        }
    }
    let turns = rec
        .turns
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(Turn {
                user: utterance_from_record(
                    t.user,
                    Speaker::User,
                    line,
                    &format!("turns[{i}].user"),
                )?,
                chatbot: utterance_from_record(
                    t.chatbot,
                    Speaker::Chatbot,
                    line,
                    &format!("turns[{i}].chatbot"),
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Conversation {
        id: rec.id,
        turns,
        user_rating: rec.rating,
    })
}

fn utterance_to_record(u: &Utterance) -> UtteranceRecord {
    UtteranceRecord {
        text: u.text.clone(),
        topic: u.topic,
        dialog_act: u.dialog_act,
        keywords: u
            .keyword_spans
            .iter()
            .map(|k| KeywordRecord {
                index: k.token_index,
                topic: k.topic,
            })
            .collect(),
        ratings: u.ratings.map(|r| RatingsRecord {
            comprehensible: r.comprehensible,
            relevant: r.relevant,
            interesting: r.interesting,
            continue_conversation: r.continue_conversation,
        }),
    }
}

/// Parse corpus text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_corpus_str(input: &str) -> Result<Vec<Conversation>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in input.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: ConversationRecord =
            serde_json::from_str(raw).map_err(|e| schema(line, e.to_string()))?;
        let conv = conversation_from_record(rec, line)?;
        if !seen.insert(conv.id.clone()) {
            return Err(schema(
                line,
                format!("id: duplicate conversation id `{}`", conv.id),
            ));
        }
        out.push(conv);
    }
    Ok(out)
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<Conversation>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_str(&text)
}

pub fn conversation_to_json(conv: &Conversation) -> String {
    let rec = ConversationRecord {
        id: conv.id.clone(),
        rating: conv.user_rating,
        turns: conv
            .turns
            .iter()
            .map(|t| TurnRecord {
                user: utterance_to_record(&t.user),
                chatbot: utterance_to_record(&t.chatbot),
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("corpus records always serialize")
}

/// Serialize conversations to corpus text (one line each, trailing newline).
pub fn serialize_corpus(convs: &[Conversation]) -> String {
    let mut s = String::new();
    for c in convs {
        s.push_str(&conversation_to_json(c));
        s.push('\n');
    }
    s
}

pub fn write_corpus(path: impl AsRef<Path>, convs: &[Conversation]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, serialize_corpus(convs)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::corpus::fixtures::GUCCI_DETOUR;

    #[test]
    fn parses_annotated_example() {
        let convs = parse_corpus_str(GUCCI_DETOUR).unwrap();
        assert_eq!(convs.len(), 1);
        let c = &convs[0];
        assert_eq!(c.turns.len(), 2);
        assert_eq!(c.turns[0].user.topic, Some(Topic::Politics));
        assert_eq!(c.turns[0].chatbot.topic, Some(Topic::Fashion));
        assert_eq!(c.turns[1].user.topic, Some(Topic::Fashion));
        assert_eq!(c.turns[1].chatbot.topic, Some(Topic::Fashion));
        assert_eq!(c.turns[1].chatbot.keyword_positions(), vec![1, 5, 7]);
        assert_eq!(c.turns[0].chatbot.speaker, Speaker::Chatbot);
    }

    #[test]
    fn unknown_topic_names_label() {
        let line = r#"{"id":"x","turns":[{"user":{"text":"hi","topic":"Cooking"},"chatbot":{"text":"ok"}}]}"#;
        let err = parse_corpus_str(line).unwrap_err().to_string();
        assert!(err.contains("Cooking"), "{err}");
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let input = format!(
            "{GUCCI_DETOUR}\n{}",
            r#"{"id":"y","turns":[{"user":{"topic":"Sports"},"chatbot":{"text":"ok"}}]}"#
        );
        let err = parse_corpus_str(&input).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("text"), "{err}");
    }

    #[test]
    fn unknown_field_rejected() {
        let line =
            r#"{"id":"x","mood":"happy","turns":[{"user":{"text":"hi"},"chatbot":{"text":"ok"}}]}"#;
        assert!(parse_corpus_str(line).is_err());
    }

    #[test]
    fn user_ratings_rejected() {
        let line = r#"{"id":"x","turns":[{"user":{"text":"hi","ratings":{"comprehensible":1,"relevant":1,"interesting":0,"continue":0}},"chatbot":{"text":"ok"}}]}"#;
        let err = parse_corpus_str(line).unwrap_err().to_string();
        assert!(err.contains("ratings"), "{err}");
    }

    #[test]
    fn non_binary_rating_rejected() {
        let line = r#"{"id":"x","turns":[{"user":{"text":"hi"},"chatbot":{"text":"ok","ratings":{"comprehensible":2,"relevant":1,"interesting":0,"continue":0}}}]}"#;
        assert!(parse_corpus_str(line).is_err());
    }

    #[test]
    fn keyword_index_out_of_range() {
        let line = r#"{"id":"x","turns":[{"user":{"text":"hi there","keywords":[{"index":2,"topic":"Phatic"}]},"chatbot":{"text":"ok"}}]}"#;
        assert!(parse_corpus_str(line).is_err());
    }

    #[test]
    fn duplicate_ids_and_empty_turns_rejected() {
        let dup = format!("{GUCCI_DETOUR}\n{GUCCI_DETOUR}");
        assert!(parse_corpus_str(&dup).is_err());
        assert!(parse_corpus_str(r#"{"id":"e","turns":[]}"#).is_err());
    }

    #[test]
    fn user_rating_range() {
        let line =
            r#"{"id":"x","rating":6,"turns":[{"user":{"text":"hi"},"chatbot":{"text":"ok"}}]}"#;
        assert!(parse_corpus_str(line).is_err());
    }

    #[test]
    fn serialize_round_trip() {
        let convs = parse_corpus_str(GUCCI_DETOUR).unwrap();
        let text = serialize_corpus(&convs);
        assert_eq!(parse_corpus_str(&text).unwrap(), convs);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            parse_corpus("/nonexistent/corpus.jsonl"),
            Err(Error::Io { .. })
        ));
    }
}
