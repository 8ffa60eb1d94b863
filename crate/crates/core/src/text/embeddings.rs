use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::numerics::{Parameter, RngStream, Tensor};

/// Where the initial embedding rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EmbeddingSource {
    /// Every row drawn uniformly from `[-scale, scale)`.
    Random { seed: u64, scale: f64 },
    /// Rows copied from a `word v1 .. vD` text file; words missing from the
    /// file are drawn as for `Random`.
    Pretrained {
        path: PathBuf,
        seed: u64,
        scale: f64,
    },
}

/// `|V| x D` embedding table. Row 0 (padding) is zero and is never updated.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub table: Parameter,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    pub fn from_table(table: Tensor, trainable: bool) -> Self {
        EmbeddingMatrix {
            table: Parameter::new(table),
            trainable,
        }
    }

    pub fn dim(&self) -> usize {
        self.table.shape().1
    }

    pub fn vocab_size(&self) -> usize {
        self.table.shape().0
    }

    pub fn row(&self, id: u32) -> &[f64] {
        self.table.value.row(id as usize)
    }

    /// Adds `scale * grad` to the gradient of row `id`; padding is skipped.
    pub fn accumulate_row_grad(&mut self, id: u32, scale: f64, grad: &[f64]) {
        if id == PAD_ID {
            return;
        }
        crate::numerics::axpy(scale, grad, self.table.grad.row_mut(id as usize));
    }
}

/// Read a whitespace-separated vector file into `word -> vector`.
pub fn load_pretrained(path: &Path, dim: usize) -> Result<HashMap<String, Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Schema {
                line: i + 1,
                message: format!("vector for `{word}`: {e}"),
            })?;
        if values.len() != dim {
            return Err(Error::Shape(format!(
                "line {}: vector for `{word}` has {} values, expected {dim}",
                i + 1,
                values.len()
            )));
        }
        out.insert(word.to_string(), values);
    }
    Ok(out)
}

pub fn init_embeddings(
    vocab: &Vocabulary,
    source: &EmbeddingSource,
    dim: usize,
) -> Result<EmbeddingMatrix> {
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "embedding dimension must be positive".into(),
        ));
    }
    let (seed, scale, pretrained) = match source {
        EmbeddingSource::Random { seed, scale } => (*seed, *scale, None),
        EmbeddingSource::Pretrained { path, seed, scale } => {
            (*seed, *scale, Some(load_pretrained(path, dim)?))
        }
    };
    let mut rng = RngStream::derived(seed, 0xe3b);
    let mut table = Tensor::zeros(vocab.len(), dim);
    for (id, word) in vocab.words().iter().enumerate().skip(1) {
        // one draw per row, used or not
        let random: Vec<f64> = (0..dim).map(|_| rng.uniform_range(-scale, scale)).collect();
        let row = pretrained
            .as_ref()
            .and_then(|p| p.get(word))
            .map(|v| v.as_slice())
            .unwrap_or(&random);
        table.row_mut(id).copy_from_slice(row);
    }
    Ok(EmbeddingMatrix::from_table(table, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::build_vocab;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn copies_pretrained_rows() {
        let f = file("cat 0.1 0.2\ndog 0.3 0.4\n");
        let vocab = build_vocab(["cat"], 1).unwrap();
        let src = EmbeddingSource::Pretrained {
            path: f.path().into(),
            seed: 1,
            scale: 0.1,
        };
        let e = init_embeddings(&vocab, &src, 2).unwrap();
        assert_eq!(e.row(vocab.lookup("cat")), &[0.1, 0.2]);
        assert_eq!(e.row(PAD_ID), &[0.0, 0.0]);
    }

    #[test]
    fn missing_words_are_seeded_uniform() {
        let f = file("cat 0.1 0.2\n");
        let vocab = build_vocab(["cat", "emu"], 1).unwrap();
        let src = EmbeddingSource::Pretrained {
            path: f.path().into(),
            seed: 4,
            scale: 0.05,
        };
        let a = init_embeddings(&vocab, &src, 2).unwrap();
        let b = init_embeddings(&vocab, &src, 2).unwrap();
        let row = a.row(vocab.lookup("emu"));
        assert!(row.iter().all(|v| v.abs() <= 0.05));
        assert_eq!(row, b.row(vocab.lookup("emu")));
    }

    #[test]
    fn dimension_mismatch() {
        let f = file("cat 0.1 0.2 0.3\n");
        let vocab = build_vocab(["cat"], 1).unwrap();
        let src = EmbeddingSource::Pretrained {
            path: f.path().into(),
            seed: 1,
            scale: 0.1,
        };
        assert!(matches!(
            init_embeddings(&vocab, &src, 2),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn unreadable_file() {
        let vocab = build_vocab(["cat"], 1).unwrap();
        let src = EmbeddingSource::Pretrained {
            path: "/no/such/vectors.txt".into(),
            seed: 1,
            scale: 0.1,
        };
        assert!(matches!(
            init_embeddings(&vocab, &src, 2),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn random_rows_in_range_and_padding_zero() {
        let vocab = build_vocab(["a", "b", "c"], 1).unwrap();
        let e = init_embeddings(
            &vocab,
            &EmbeddingSource::Random {
                seed: 2,
                scale: 0.1,
            },
            4,
        )
        .unwrap();
        assert_eq!(e.row(0), &[0.0; 4]);
        for id in 1..vocab.len() as u32 {
            assert!(e.row(id).iter().all(|v| v.abs() <= 0.1 && *v != 0.0));
        }
        assert!(init_embeddings(
            &vocab,
            &EmbeddingSource::Random {
                seed: 2,
                scale: 0.1
            },
            0
        )
        .is_err());
    }
}
