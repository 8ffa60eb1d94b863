//! Annotated conversations: data model, file ingestion, splits, example
//! construction and the synthetic corpus generator.

mod examples;
mod io;
mod labels;
mod split;
mod synth;
mod types;

pub use examples::{build_all_examples, build_examples, ClassificationExample, Side};
pub use io::{
    conversation_to_json, parse_corpus, parse_corpus_str, serialize_corpus, write_corpus,
};
pub use labels::{DialogAct, Label, Task, Topic};
pub use split::{downsample_class, make_splits, SplitName, Splits};
pub use synth::{generate_synthetic, ActTemplates, SynthConfig, Template};
pub use types::{Conversation, KeywordSpan, ResponseRatings, Speaker, Turn, Utterance};
