//! Tokenization, vocabulary and embedding tables.

mod embeddings;
mod tokenize;
mod vocab;

pub use embeddings::{init_embeddings, load_pretrained, EmbeddingMatrix, EmbeddingSource};
pub use tokenize::tokenize;
pub use vocab::{build_vocab, Vocabulary, PAD_ID, UNK_ID};
