//! Turn vectors and the averaged context feature.

use crate::corpus::{DialogAct, Turn};
use crate::error::{Error, Result};
use crate::text::{tokenize, EmbeddingMatrix, Vocabulary};

/// Averaged previous-turn vector plus optional dialog-act distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextFeature {
    pub turn_context: Vec<f64>,
    pub act_feature: Option<Vec<f64>>,
}

/// Token ids of a turn: the user utterance followed by the chatbot response.
pub fn encode_turn(turn: &Turn, vocab: &Vocabulary) -> Vec<u32> {
    let mut tokens = tokenize(&turn.user.text);
    tokens.extend(tokenize(&turn.chatbot.text));
    vocab.encode(&tokens)
}

/// Mean embedding of `ids`; the zero vector when `ids` is empty.
pub fn mean_embedding(emb: &EmbeddingMatrix, ids: &[u32]) -> Vec<f64> {
    let mut out = vec![0.0; emb.dim()];
    if ids.is_empty() {
        return out;
    }
    for &id in ids {
        crate::numerics::axpy(1.0, emb.row(id), &mut out);
    }
    let n = ids.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// Backward of [`mean_embedding`].
pub(crate) fn mean_embedding_backward(emb: &mut EmbeddingMatrix, ids: &[u32], grad: &[f64]) {
    if ids.is_empty() || !emb.trainable {
        return;
    }
    let scale = 1.0 / ids.len() as f64;
    for &id in ids {
        emb.accumulate_row_grad(id, scale, grad);
    }
}

/// Mean of the turn vectors; the zero vector when there are no turns.
pub fn context_vector(emb: &EmbeddingMatrix, turns: &[Vec<u32>]) -> Vec<f64> {
    let mut out = vec![0.0; emb.dim()];
    if turns.is_empty() {
        return out;
    }
    for t in turns {
        crate::numerics::axpy(1.0, &mean_embedding(emb, t), &mut out);
    }
    let n = turns.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

pub(crate) fn context_vector_backward(emb: &mut EmbeddingMatrix, turns: &[Vec<u32>], grad: &[f64]) {
    if turns.is_empty() {
        return;
    }
    let scaled: Vec<f64> = grad.iter().map(|g| g / turns.len() as f64).collect();
    for t in turns {
        mean_embedding_backward(emb, t, &scaled);
    }
}

pub fn build_turn_vector(turn: &Turn, emb: &EmbeddingMatrix, vocab: &Vocabulary) -> Vec<f64> {
    mean_embedding(emb, &encode_turn(turn, vocab))
}

pub fn check_act_feature(act: &[f64]) -> Result<()> {
    if act.len() != DialogAct::count() {
        return Err(Error::Shape(format!(
            "act feature of length {}, expected {}",
            act.len(),
            DialogAct::count()
        )));
    }
    let sum: f64 = act.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || act.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "act feature is not a distribution (sums to {sum})"
        )));
    }
    Ok(())
}

/// Context feature from at most `window` preceding turns.
pub fn build_context(
    context_turns: &[Turn],
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
    act_dist: Option<Vec<f64>>,
    window: usize,
) -> Result<ContextFeature> {
    if context_turns.len() > window {
        return Err(Error::InvalidArgument(format!(
            "{} context turns supplied for a window of {window}",
            context_turns.len()
        )));
    }
    if let Some(a) = &act_dist {
        check_act_feature(a)?;
    }
    let ids: Vec<Vec<u32>> = context_turns
        .iter()
        .map(|t| encode_turn(t, vocab))
        .collect();
    Ok(ContextFeature {
        turn_context: context_vector(emb, &ids),
        act_feature: act_dist,
    })
}

/// One-hot distribution for a gold act (uniform when unknown or `NotSet`).
pub fn act_one_hot(act: Option<DialogAct>) -> Vec<f64> {
    let n = DialogAct::count();
    match act.filter(|a| *a != DialogAct::NotSet) {
        Some(a) => {
            let mut v = vec![0.0; n];
            v[a.index()] = 1.0;
            v
        }
        None => vec![1.0 / n as f64; n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Speaker, Utterance};
    use crate::numerics::Tensor;
    use crate::text::build_vocab;

    fn setup() -> (Vocabulary, EmbeddingMatrix) {
        let vocab = build_vocab(["a", "b", "c"], 1).unwrap();
        // rows: pad, unk, a, b, c (equal counts sort lexicographically)
        let table = Tensor::from_vec(5, 2, vec![0., 0., 9., 9., 1., 0., 0., 1., 2., 2.]).unwrap();
        (vocab, EmbeddingMatrix::from_table(table, true))
    }

    fn turn(u: &str, c: &str) -> Turn {
        Turn::new(
            Utterance::new(Speaker::User, u),
            Utterance::new(Speaker::Chatbot, c),
        )
    }

    #[test]
    fn turn_vector_averages_both_sides() {
        let (v, e) = setup();
        assert_eq!(build_turn_vector(&turn("a b", "c"), &e, &v), vec![1.0, 1.0]);
    }

    #[test]
    fn oov_turn_is_unknown_row() {
        let (v, e) = setup();
        assert_eq!(build_turn_vector(&turn("x y", "z"), &e, &v), vec![9.0, 9.0]);
    }

    #[test]
    fn empty_turn_is_zero() {
        let (v, e) = setup();
        assert_eq!(build_turn_vector(&turn("", "?"), &e, &v), vec![0.0, 0.0]);
    }

    #[test]
    fn context_averages_turn_vectors() {
        let (v, e) = setup();
        let ctx = build_context(&[turn("a", ""), turn("b", "")], &e, &v, None, 5).unwrap();
        assert_eq!(ctx.turn_context, vec![0.5, 0.5]);
        let none = build_context(&[], &e, &v, None, 5).unwrap();
        assert_eq!(none.turn_context, vec![0.0, 0.0]);
    }

    #[test]
    fn context_longer_than_window_rejected() {
        let (v, e) = setup();
        let turns: Vec<Turn> = (0..7).map(|_| turn("a", "b")).collect();
        assert!(build_context(&turns, &e, &v, None, 5).is_err());
        assert!(build_context(&turns[..5], &e, &v, None, 5).is_ok());
    }

    #[test]
    fn act_feature_validated() {
        let (v, e) = setup();
        assert!(build_context(&[], &e, &v, Some(vec![0.5; 14]), 5).is_err());
        let ctx = build_context(
            &[],
            &e,
            &v,
            Some(act_one_hot(Some(DialogAct::GeneralChat))),
            5,
        )
        .unwrap();
        assert_eq!(
            ctx.act_feature.unwrap()[DialogAct::GeneralChat.index()],
            1.0
        );
        let uniform = act_one_hot(Some(DialogAct::NotSet));
        assert!((uniform.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
