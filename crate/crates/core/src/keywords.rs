//! Keyword extraction from the ADAN attention table.
//!
//! The predicted topic selects one attention row; the utterance's token
//! positions are ranked by their attention weight in that row (ties go to
//! the earlier position) and the top `j` are returned.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{adan_forward, AdanModel, ModelInput};
use crate::numerics::{argmax, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeywordPrediction {
    /// Index of the predicted label in the model's label space.
    pub label: usize,
    /// Selected token positions, highest attention first.
    pub positions: Vec<usize>,
    pub scores: Vec<f64>,
}

pub fn extract_keywords(
    model: &AdanModel,
    input: &ModelInput,
    j: usize,
) -> Result<KeywordPrediction> {
    if j == 0 {
        return Err(Error::InvalidArgument(
            "keyword count must be at least 1".into(),
        ));
    }
    let (probs, alpha) = adan_forward(model, input, false, &mut RngStream::new(0))?;
    let label = argmax(&probs);
    let (positions, scores) = top_positions(&alpha[label], j);
    Ok(KeywordPrediction {
        label,
        positions,
        scores,
    })
}

/// The `j` largest entries of `weights` (stable: equal weights keep index
/// order).
pub(crate) fn top_positions(weights: &[f64], j: usize) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]));
    order.truncate(j);
    let scores = order.iter().map(|&i| weights[i]).collect();
    (order, scores)
}

/// Token-level micro precision and recall.
pub fn evaluate_keywords(preds: &[KeywordPrediction], gold: &[Vec<usize>]) -> Result<(f64, f64)> {
    if preds.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} gold keyword sets",
            preds.len(),
            gold.len()
        )));
    }
    let (mut hit, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for (p, g) in preds.iter().zip(gold) {
        let g: BTreeSet<usize> = g.iter().copied().collect();
        let p: BTreeSet<usize> = p.positions.iter().copied().collect();
        hit += p.intersection(&g).count();
        n_pred += p.len();
        n_gold += g.len();
    }
    if n_pred == 0 || n_gold == 0 {
        return Err(Error::Undefined("no predicted or gold keywords".into()));
    }
    Ok((hit as f64 / n_pred as f64, hit as f64 / n_gold as f64))
}
