use super::labels::{DialogAct, Topic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Speaker {
    User,
    Chatbot,
}

/// Four binary judgements of a chatbot response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponseRatings {
    pub comprehensible: u8,
    pub relevant: u8,
    pub interesting: u8,
    pub continue_conversation: u8,
}

/// A token (by position in the tokenized utterance) marked as evidence for a topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeywordSpan {
    pub token_index: usize,
    pub topic: Topic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    pub topic: Option<Topic>,
    pub dialog_act: Option<DialogAct>,
    pub keyword_spans: Vec<KeywordSpan>,
    /// Only ever present on chatbot responses.
    pub ratings: Option<ResponseRatings>,
}

impl Utterance {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Utterance {
            speaker,
            text: text.into(),
            topic: None,
            dialog_act: None,
            keyword_spans: Vec::new(),
            ratings: None,
        }
    }

    pub fn with_topic(mut self, topic: Topic) -> Self {
        self.topic = Some(topic);
        self
    }

    pub fn with_act(mut self, act: DialogAct) -> Self {
        self.dialog_act = Some(act);
        self
    }

    pub fn with_keyword(mut self, token_index: usize, topic: Topic) -> Self {
        self.keyword_spans.push(KeywordSpan { token_index, topic });
        self
    }

    pub fn with_ratings(mut self, ratings: ResponseRatings) -> Self {
        self.ratings = Some(ratings);
        self
    }

    pub fn keyword_positions(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.keyword_spans.iter().map(|k| k.token_index).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// One user utterance and the chatbot response that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub user: Utterance,
    pub chatbot: Utterance,
}

impl Turn {
    pub fn new(user: Utterance, chatbot: Utterance) -> Self {
        Turn { user, chatbot }
    }

    pub fn utterance(&self, speaker: Speaker) -> &Utterance {
        match speaker {
            Speaker::User => &self.user,
            Speaker::Chatbot => &self.chatbot,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Turn>,
    /// End-of-conversation user rating on a 1-5 scale.
    pub user_rating: Option<f64>,
}
