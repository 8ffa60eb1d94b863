use serde::Serialize;

use super::EncodedExample;
use crate::error::{Error, Result};
use crate::metrics::{per_class_accuracy, ClassScore, MetricReport};
use crate::models::Classifier;
use crate::numerics::argmax;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub per_class: Vec<Option<f64>>,
    pub support: Vec<usize>,
    pub predictions: Vec<usize>,
}

impl Evaluation {
    pub fn to_report(&self, label_names: &[&str]) -> MetricReport {
        MetricReport {
            examples: Some(self.predictions.len()),
            accuracy: Some(self.accuracy),
            per_class: label_names
                .iter()
                .zip(self.per_class.iter().zip(&self.support))
                .filter(|(_, (_, &n))| n > 0)
                .map(|(name, (acc, &n))| ClassScore {
                    label: name.to_string(),
                    support: n,
                    accuracy: *acc,
                })
                .collect(),
            ..Default::default()
        }
    }
}

/// Inference-mode accuracy with a per-class breakdown.
pub fn evaluate(model: &Classifier, examples: &[EncodedExample]) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no examples to evaluate".into()));
    }
    let task = model.config().task;
    let k = model.config().num_labels();
    let mut predictions = Vec::with_capacity(examples.len());
    let mut gold = Vec::with_capacity(examples.len());
    for ex in examples {
        if ex.task != task {
            return Err(Error::LabelSpace(format!(
                "{:?} example for a {task:?} model",
                ex.task
            )));
        }
        predictions.push(argmax(&model.predict(&ex.input())?));
        gold.push(ex.label);
    }
    let mut support = vec![0; k];
    for &g in &gold {
        support[g] += 1;
    }
    Ok(Evaluation {
        accuracy: crate::metrics::accuracy(&predictions, &gold)?,
        per_class: per_class_accuracy(&predictions, &gold, k)?,
        support,
        predictions,
    })
}
