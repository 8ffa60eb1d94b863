//! Synthetic context-dependent conversations.
//!
//! Each user utterance is either *topical* (a template with one planted
//! keyword from its topic's lexicon) or an *anaphoric* filler such as "yes"
//! that carries no topical evidence: its topic is inherited from the
//! previous turn and its dialog act is the reply act of the previous chatbot
//! response. Chatbot responses are always topical. All randomness comes from
//! the config seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::labels::{DialogAct, Topic};
use super::types::{Conversation, Speaker, Turn, Utterance};
use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::text::tokenize;

const PLACEHOLDER: &str = "{kw}";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub act: DialogAct,
    /// Text with exactly one `{kw}` placeholder.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActTemplates {
    pub user: Vec<Template>,
    pub chatbot: Vec<Template>,
    pub fillers: Vec<String>,
    /// Act of a filler given the act of the chatbot response before it.
    pub replies: BTreeMap<DialogAct, DialogAct>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_conversations: usize,
    pub turns_per_conversation: usize,
    pub anaphora_rate: f64,
    pub lexicons: BTreeMap<Topic, Vec<String>>,
    pub act_templates: ActTemplates,
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn builtin_lexicon(topic: Topic) -> Vec<String> {
    words(match topic {
        Topic::Politics => &[
            "politics",
            "election",
            "senate",
            "congress",
            "president",
            "democracy",
            "parliament",
            "vote",
            "governor",
            "campaign",
            "legislation",
            "diplomacy",
        ],
        Topic::Fashion => &[
            "gucci", "fashion", "dress", "designer", "runway", "handbag", "sneakers", "jacket",
            "jewelry", "boutique", "denim", "vogue",
        ],
        Topic::Sports => &[
            "yankees",
            "baseball",
            "football",
            "soccer",
            "tennis",
            "basketball",
            "hockey",
            "olympics",
            "golf",
            "cricket",
            "marathon",
            "nba",
        ],
        Topic::ScienceAndTechnology => &[
            "hal",
            "robots",
            "computers",
            "physics",
            "chemistry",
            "smartphone",
            "software",
            "rocket",
            "astronomy",
            "internet",
            "laptop",
            "biology",
        ],
        Topic::EntertainmentMusic => &[
            "music", "guitar", "concert", "album", "singer", "jazz", "piano", "band", "beatles",
            "hiphop", "opera", "song",
        ],
        Topic::EntertainmentMovies => &[
            "movies",
            "actor",
            "cinema",
            "hollywood",
            "director",
            "starwars",
            "netflix",
            "film",
            "oscars",
            "thriller",
            "sequel",
            "pixar",
        ],
        Topic::EntertainmentBooks => &[
            "books",
            "novel",
            "author",
            "poetry",
            "library",
            "tolkien",
            "chapter",
            "fiction",
            "bestseller",
            "literature",
            "shakespeare",
            "paperback",
        ],
        Topic::EntertainmentGeneral => &[
            "puzzles",
            "crosswords",
            "magic",
            "circus",
            "comedy",
            "hobbies",
            "celebrities",
            "podcasts",
            "festival",
            "theater",
            "cartoons",
            "sudoku",
        ],
        Topic::Phatic => &[
            "hello",
            "hi",
            "howdy",
            "greetings",
            "goodbye",
            "bye",
            "thanks",
            "cheers",
            "hey",
            "morning",
            "evening",
            "chat",
        ],
        Topic::Interactive => &[
            "game",
            "quiz",
            "riddle",
            "joke",
            "karaoke",
            "charades",
            "hangman",
            "tictactoe",
            "pretend",
            "dare",
            "adventure",
            "bingo",
        ],
        Topic::Other => &[
            "weather",
            "cooking",
            "recipes",
            "travel",
            "pets",
            "gardening",
            "cars",
            "shopping",
            "coffee",
            "insurance",
            "taxes",
            "holidays",
        ],
        Topic::InappropriateContent => &[
            "stupid", "idiot", "dumb", "ugly", "loser", "hate", "jerk", "moron", "nasty", "creep",
            "trash", "gross",
        ],
    })
}

impl ActTemplates {
    pub fn builtin() -> Self {
        let t = |act, text: &str| Template {
            act,
            text: text.to_string(),
        };
        ActTemplates {
            user: vec![
                t(DialogAct::InformationRequest, "what is {kw} ?"),
                t(
                    DialogAct::InformationRequest,
                    "can you tell me about {kw} ?",
                ),
                t(DialogAct::OpinionRequest, "do you like {kw}"),
                t(DialogAct::OpinionExpression, "i like {kw}"),
                t(DialogAct::OpinionExpression, "i really love {kw}"),
                t(DialogAct::TopicSwitch, "let's talk about {kw}"),
            ],
            chatbot: vec![
                t(
                    DialogAct::InformationDelivery,
                    "did you know {kw} is very popular these days",
                ),
                t(DialogAct::OpinionRequest, "what do you think about {kw} ?"),
                t(
                    DialogAct::TopicSwitch,
                    "would you like to talk about {kw} ?",
                ),
                t(DialogAct::OpinionExpression, "i think {kw} is great"),
            ],
            fillers: words(&[
                "yes",
                "tell me more",
                "what about that",
                "sure",
                "okay go on",
            ]),
            replies: BTreeMap::from([
                (
                    DialogAct::InformationDelivery,
                    DialogAct::InformationRequest,
                ),
                (DialogAct::OpinionRequest, DialogAct::OpinionExpression),
                (DialogAct::TopicSwitch, DialogAct::UserInstruction),
                (DialogAct::OpinionExpression, DialogAct::GeneralChat),
            ]),
        }
    }
}

impl SynthConfig {
    /// Built-in lexicons for the first `n_topics` topics of the label space.
    pub fn builtin(
        seed: u64,
        n_conversations: usize,
        turns_per_conversation: usize,
        anaphora_rate: f64,
        n_topics: usize,
    ) -> Self {
        let lexicons = Topic::ALL
            .iter()
            .take(n_topics)
            .map(|&t| (t, builtin_lexicon(t)))
            .collect();
        SynthConfig {
            seed,
            n_conversations,
            turns_per_conversation,
            anaphora_rate,
            lexicons,
            act_templates: ActTemplates::builtin(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..=1.0).contains(&self.anaphora_rate) {
            return bad(format!(
                "anaphora_rate {} outside [0, 1]",
                self.anaphora_rate
            ));
        }
        if self.n_conversations == 0 || self.turns_per_conversation == 0 {
            return bad("n_conversations and turns_per_conversation must be positive".into());
        }
        if self.lexicons.is_empty() {
            return bad("empty lexicon".into());
        }
        let mut seen = BTreeSet::new();
        for (topic, list) in &self.lexicons {
            if list.is_empty() {
                return bad(format!("empty lexicon for {topic}"));
            }
            for w in list {
                if tokenize(w) != [w.as_str()] {
                    return bad(format!(
                        "lexicon word `{w}` is not a single lowercase token"
                    ));
                }
                if !seen.insert(w.as_str()) {
                    return bad(format!(
                        "lexicon word `{w}` appears under more than one topic"
                    ));
                }
            }
        }
        let at = &self.act_templates;
        if at.user.is_empty() || at.chatbot.is_empty() || at.fillers.is_empty() {
            return bad("act templates need user, chatbot and filler entries".into());
        }
        for tpl in at.user.iter().chain(&at.chatbot) {
            if keyword_slot(&tpl.text).is_none() {
                return bad(format!(
                    "template `{}` needs exactly one {PLACEHOLDER}",
                    tpl.text
                ));
            }
        }
        for f in &at.fillers {
            let toks = tokenize(f);
            if toks.is_empty() || toks.iter().any(|t| seen.contains(t.as_str())) {
                return bad(format!("filler `{f}` is empty or contains a lexicon word"));
            }
        }
        for tpl in &at.chatbot {
            if !at.replies.contains_key(&tpl.act) {
                return bad(format!("no reply act for chatbot act {}", tpl.act));
            }
        }
        Ok(())
    }
}

/// Token position of the placeholder in a template, if it occurs exactly once.
fn keyword_slot(template: &str) -> Option<usize> {
    if template.matches(PLACEHOLDER).count() != 1 {
        return None;
    }
    let marker = "kwslotmarker";
    let toks = tokenize(&template.replace(PLACEHOLDER, marker));
    let pos = toks.iter().position(|t| t == marker)?;
    (toks.iter().filter(|t| *t == marker).count() == 1).then_some(pos)
}

fn fill(
    template: &Template,
    topic: Topic,
    lexicon: &[String],
    speaker: Speaker,
    rng: &mut RngStream,
) -> Utterance {
    let word = &lexicon[rng.below(lexicon.len())];
    let slot = keyword_slot(&template.text).expect("validated template");
    Utterance::new(speaker, template.text.replace(PLACEHOLDER, word))
        .with_topic(topic)
        .with_act(template.act)
        .with_keyword(slot, topic)
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<Conversation>> {
    config.validate()?;
    let mut rng = RngStream::derived(config.seed, 0x5e7);
    let topics: Vec<Topic> = config.lexicons.keys().copied().collect();
    let at = &config.act_templates;
    let mut out = Vec::with_capacity(config.n_conversations);
    for c in 0..config.n_conversations {
        let mut turns: Vec<Turn> = Vec::with_capacity(config.turns_per_conversation);
        for i in 0..config.turns_per_conversation {
            let previous = turns.last();
            let anaphoric = i > 0 && rng.bernoulli(config.anaphora_rate);
            let (topic, user) = match previous {
                Some(prev) if anaphoric => {
                    let topic = prev.chatbot.topic.expect("generated turns are labelled");
                    let prev_act = prev
                        .chatbot
                        .dialog_act
                        .expect("generated turns are labelled");
                    let text = &at.fillers[rng.below(at.fillers.len())];
                    let act = at.replies[&prev_act];
                    (
                        topic,
                        Utterance::new(Speaker::User, text.clone())
                            .with_topic(topic)
                            .with_act(act),
                    )
                }
                _ => {
                    let topic = topics[rng.below(topics.len())];
                    let tpl = &at.user[rng.below(at.user.len())];
                    (
                        topic,
                        fill(
                            tpl,
                            topic,
                            &config.lexicons[&topic],
                            Speaker::User,
                            &mut rng,
                        ),
                    )
                }
            };
            let tpl = &at.chatbot[rng.below(at.chatbot.len())];
            let chatbot = fill(
                tpl,
                topic,
                &config.lexicons[&topic],
                Speaker::Chatbot,
                &mut rng,
            );
            turns.push(Turn::new(user, chatbot));
        }
        out.push(Conversation {
            id: format!("synth-{c:05}"),
            turns,
            user_rating: None,
        });
    }
    Ok(out)
}
