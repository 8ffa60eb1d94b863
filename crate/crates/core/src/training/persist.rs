//! Model files.
//!
//! ```text
//! "CTCMDL01"            8-byte magic
//! version               u32, little endian
//! header length         u32, little endian
//! header                JSON: configuration, label names, vocabulary,
//!                       parameter block names and shapes
//! parameter blocks      f32 little endian, row major, in header order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActSource, TrainConfig};
use crate::corpus::Task;
use crate::error::{Error, Result};
use crate::models::{AdanModel, BiLstmModel, Classifier, DanModel, Family, ModelConfig};
use crate::numerics::Tensor;
use crate::text::{EmbeddingMatrix, Vocabulary};

pub const MAGIC: &[u8; 8] = b"CTCMDL01";
pub const FORMAT_VERSION: u32 = 1;

/// A model together with everything needed to apply it to raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Classifier,
    pub vocab: Vocabulary,
    pub acts: ActSource,
    pub train_config: Option<TrainConfig>,
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.model.config().task
    }

    pub fn expect_task(&self, task: Task) -> Result<()> {
        if self.task() != task {
            return Err(Error::LabelSpace(format!(
                "model predicts {:?} labels, {task:?} expected",
                self.task()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    labels: Vec<String>,
    trainable_embeddings: bool,
    acts: ActSource,
    vocab_hash: String,
    vocab: Vec<String>,
    blocks: Vec<Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_config: Option<TrainConfig>,
}

#[derive(Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Block {
    name: String,
    rows: usize,
    cols: usize,
}

/// Parameter shapes a configuration implies, in serialization order.
fn expected_blocks(cfg: &ModelConfig, vocab_len: usize) -> Vec<Block> {
    let b = |name: &str, rows: usize, cols: usize| Block {
        name: name.to_string(),
        rows,
        cols,
    };
    let (d, h, k) = (cfg.embed_dim, cfg.hidden, cfg.num_labels());
    let mut out = vec![b("embeddings", vocab_len, d)];
    match cfg.family {
        Family::Dan => {
            let din = DanModel::input_dim(cfg);
            out.extend([b("w1", h, din), b("b1", h, 1), b("w0", k, h), b("b0", k, 1)]);
        }
        Family::Adan => {
            let din = AdanModel::input_dim(cfg);
            out.extend([
                b("attention", k, vocab_len),
                b("w1", h, din),
                b("b1", h, 1),
                b("w0", 1, h),
                b("b0", 1, 1),
            ]);
        }
        Family::Bilstm => {
            let din = BiLstmModel::step_dim(cfg);
            let dout = BiLstmModel::output_dim(cfg);
            out.extend([
                b("forward_weights", 4 * h, din + h),
                b("forward_bias", 4 * h, 1),
                b("backward_weights", 4 * h, din + h),
                b("backward_bias", 4 * h, 1),
                b("w0", k, dout),
                b("b0", k, 1),
            ]);
        }
    }
    out
}

pub fn model_to_bytes(m: &TrainedModel) -> Vec<u8> {
    let cfg = m.model.config();
    let params = m.model.parameters();
    let header = Header {
        model: cfg.clone(),
        labels: cfg
            .task
            .label_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        trainable_embeddings: m.model.embeddings().trainable,
        acts: m.acts,
        vocab_hash: m.vocab.hash(),
        vocab: m.vocab.words().to_vec(),
        blocks: params
            .iter()
            .map(|(name, p)| Block {
                name: name.to_string(),
                rows: p.shape().0,
                cols: p.shape().1,
            })
            .collect(),
        train_config: m.train_config.clone(),
    };
    let header = serde_json::to_vec(&header).expect("header always serializes");
    let n_values: usize = params.iter().map(|(_, p)| p.len()).sum();
    let mut out = Vec::with_capacity(16 + header.len() + 4 * n_values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, p) in params {
        for &v in p.value.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptModel(msg.into())
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < 16 {
        return Err(corrupt(format!("truncated: {} bytes", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let rest = &bytes[16..];
    if header_len > rest.len() {
        return Err(corrupt(format!(
            "truncated: header of {header_len} bytes, {} available",
            rest.len()
        )));
    }
    let (header, body) = rest.split_at(header_len);
    let header: Header =
        serde_json::from_slice(header).map_err(|e| corrupt(format!("header: {e}")))?;
    header
        .model
        .validate()
        .map_err(|e| corrupt(format!("header: {e}")))?;
    let names = header.model.task.label_names();
    if header.labels.len() != names.len() || header.labels.iter().zip(&names).any(|(a, b)| a != b) {
        return Err(Error::LabelSpace(format!(
            "file labels {:?} do not match the {:?} label space",
            header.labels, header.model.task
        )));
    }
    let vocab =
        Vocabulary::from_words(header.vocab).map_err(|e| corrupt(format!("vocabulary: {e}")))?;
    if vocab.hash() != header.vocab_hash {
        return Err(corrupt("vocabulary hash does not match its contents"));
    }

    // every size is checked against the byte count before anything is allocated
    let expected = expected_blocks(&header.model, vocab.len());
    if expected != header.blocks {
        return Err(corrupt("parameter blocks do not match the configuration"));
    }
    let n_values = expected
        .iter()
        .try_fold(0usize, |acc, b| {
            b.rows.checked_mul(b.cols).and_then(|n| acc.checked_add(n))
        })
        .ok_or_else(|| corrupt("parameter sizes overflow"))?;
    if n_values.checked_mul(4) != Some(body.len()) {
        return Err(corrupt(format!(
            "expected {} parameter bytes, found {}",
            n_values.saturating_mul(4),
            body.len()
        )));
    }

    let emb = EmbeddingMatrix::from_table(
        Tensor::zeros(vocab.len(), header.model.embed_dim),
        header.trainable_embeddings,
    );
    let mut model = Classifier::new(header.model, emb, 0)?;
    let mut values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    for (_, p) in model.parameters_mut() {
        for v in p.value.as_mut_slice() {
            *v = values.next().expect("length checked above");
        }
    }
    Ok(TrainedModel {
        model,
        vocab,
        acts: header.acts,
        train_config: header.train_config,
    })
}

pub fn save_model(m: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_bytes(m)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
