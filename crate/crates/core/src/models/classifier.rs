use super::adan::AdanModel;
use super::bilstm::BiLstmModel;
use super::dan::{dan_forward, DanModel};
use super::{Family, ModelConfig, ModelInput};
use crate::corpus::Task;
use crate::error::{Error, Result};
use crate::numerics::{cross_entropy, Parameter, RngStream};
use crate::text::EmbeddingMatrix;

/// Any of the three model families behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Dan(DanModel),
    Adan(AdanModel),
    BiLstm(BiLstmModel),
}

impl Classifier {
    pub fn new(config: ModelConfig, embeddings: EmbeddingMatrix, seed: u64) -> Result<Self> {
        Ok(match config.family {
            Family::Dan => Classifier::Dan(DanModel::new(config, embeddings, seed)?),
            Family::Adan => Classifier::Adan(AdanModel::new(config, embeddings, seed)?),
            Family::Bilstm => Classifier::BiLstm(BiLstmModel::new(config, embeddings, seed)?),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Classifier::Dan(m) => &m.config,
            Classifier::Adan(m) => &m.config,
            Classifier::BiLstm(m) => &m.config,
        }
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        match self {
            Classifier::Dan(m) => &m.embeddings,
            Classifier::Adan(m) => &m.embeddings,
            Classifier::BiLstm(m) => &m.embeddings,
        }
    }

    pub fn embeddings_mut(&mut self) -> &mut EmbeddingMatrix {
        match self {
            Classifier::Dan(m) => &mut m.embeddings,
            Classifier::Adan(m) => &mut m.embeddings,
            Classifier::BiLstm(m) => &mut m.embeddings,
        }
    }

    /// Inference-mode class distribution.
    pub fn predict(&self, input: &ModelInput) -> Result<Vec<f64>> {
        match self {
            Classifier::Dan(m) => Ok(m.forward(input, None)?.probs),
            Classifier::Adan(m) => Ok(m.forward(input, None)?.probs),
            Classifier::BiLstm(m) => Ok(m.forward(input, None)?.probs),
        }
    }

    /// Inference-mode cross-entropy loss of `label`.
    pub fn loss(&self, input: &ModelInput, label: usize) -> Result<f64> {
        Ok(cross_entropy(&self.predict(input)?, label)?.0)
    }

    /// Training-mode forward pass (dropout drawn from `rng`), cross-entropy
    /// loss, and backward pass. Gradients are added, scaled by `weight`, to
    /// the parameters' accumulators; the unscaled loss is returned.
    pub fn loss_and_accumulate(
        &mut self,
        input: &ModelInput,
        label: usize,
        weight: f64,
        rng: &mut RngStream,
    ) -> Result<f64> {
        macro_rules! step {
            ($m:expr) => {{
                let cache = $m.forward(input, Some(rng))?;
                let (loss, mut d) = cross_entropy(&cache.probs, label)?;
                d.iter_mut().for_each(|v| *v *= weight);
                $m.backward(input, &cache, &d)?;
                loss
            }};
        }
        let loss = match self {
            Classifier::Dan(m) => step!(m),
            Classifier::Adan(m) => step!(m),
            Classifier::BiLstm(m) => step!(m),
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss {loss}")));
        }
        Ok(loss)
    }

    /// Parameters in serialization order; the embedding table comes first.
    pub fn parameters(&self) -> Vec<(&'static str, &Parameter)> {
        match self {
            Classifier::Dan(m) => m.parameters(),
            Classifier::Adan(m) => m.parameters(),
            Classifier::BiLstm(m) => m.parameters(),
        }
    }

    pub fn parameters_mut(&mut self) -> Vec<(&'static str, &mut Parameter)> {
        match self {
            Classifier::Dan(m) => m.parameters_mut(),
            Classifier::Adan(m) => m.parameters_mut(),
            Classifier::BiLstm(m) => m.parameters_mut(),
        }
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.parameters_mut() {
            p.zero_grad();
        }
    }

    pub fn as_adan(&self) -> Option<&AdanModel> {
        match self {
            Classifier::Adan(m) => Some(m),
            _ => None,
        }
    }
}

/// Dialog-act distribution from a DAN trained over the 14 acts.
pub fn predict_dialog_act(act_model: &DanModel, input: &ModelInput) -> Result<Vec<f64>> {
    if act_model.config.task != Task::DialogAct {
        return Err(Error::LabelSpace(format!(
            "act model predicts {:?} labels",
            act_model.config.task
        )));
    }
    dan_forward(act_model, input, false, &mut RngStream::new(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testutil::*;
    use crate::models::ContextMode;
    use crate::numerics::grad_check_with_floor;

    /// Gradients below this magnitude sit under the central-difference
    /// rounding noise of a full forward pass at `h = 1e-6`.
    pub(crate) const GRADIENT_FLOOR: f64 = 1e-5;

    /// Worst relative error over every parameter of `model` for a training
    /// step with a fixed dropout stream.
    fn worst_gradient_error(model: &Classifier, input: &ModelInput, label: usize) -> f64 {
        let mut analytic = model.clone();
        analytic.zero_grad();
        analytic
            .loss_and_accumulate(input, label, 1.0, &mut RngStream::new(77))
            .unwrap();
        let mut worst = 0.0f64;
        for (idx, (name, p)) in analytic.parameters().into_iter().enumerate() {
            let x = p.value.as_slice().to_vec();
            let f = |v: &[f64]| {
                let mut probe = model.clone();
                probe.parameters_mut()[idx]
                    .1
                    .value
                    .as_mut_slice()
                    .copy_from_slice(v);
                probe
                    .loss_and_accumulate(input, label, 1.0, &mut RngStream::new(77))
                    .unwrap()
            };
            let err = grad_check_with_floor(f, p.grad.as_slice(), &x, 1e-6, GRADIENT_FLOOR);
            assert!(err < 1e-4, "{name}: {err}");
            worst = worst.max(err);
        }
        worst
    }

    fn instance(family: Family, context: ContextMode, act: bool, seed: u64) -> Classifier {
        let mut cfg = small_config(family, context, act);
        cfg.dropout = 0.3;
        let mut m = Classifier::new(cfg, embeddings(seed), seed).unwrap();
        // weights of order one
        let mut rng = RngStream::derived(seed, 1);
        for (name, p) in m.parameters_mut() {
            if name != "embeddings" {
                let (r, c) = p.shape();
                p.value = crate::numerics::Tensor::uniform(r, c, 1.0, &mut rng);
            }
        }
        m
    }

    fn check_family(family: Family, context: ContextMode, act: bool) {
        let mut rng = RngStream::new(123);
        for seed in 0..3 {
            let m = instance(family, context, act, seed);
            let ids = random_ids(&mut rng, 3);
            let ctx = vec![random_ids(&mut rng, 2), random_ids(&mut rng, 4)];
            let a = random_act(&mut rng);
            let mut input = ModelInput::new(&ids).with_context(&ctx);
            if act {
                input = input.with_act(&a);
            }
            worst_gradient_error(&m, &input, (seed as usize * 5) % 12);
        }
    }

    #[test]
    fn dan_gradients() {
        check_family(Family::Dan, ContextMode::None, false);
        check_family(Family::Dan, ContextMode::Avg, true);
    }

    #[test]
    fn adan_gradients() {
        check_family(Family::Adan, ContextMode::None, false);
        check_family(Family::Adan, ContextMode::Avg, true);
    }

    #[test]
    fn bilstm_gradients() {
        check_family(Family::Bilstm, ContextMode::None, false);
        check_family(Family::Bilstm, ContextMode::Avg, true);
        check_family(Family::Bilstm, ContextMode::Seq, false);
    }

    #[test]
    fn padding_row_never_receives_gradient() {
        for family in [Family::Dan, Family::Adan, Family::Bilstm] {
            let mut cfg = small_config(family, ContextMode::Avg, false);
            cfg.dropout = 0.0;
            let mut m = Classifier::new(cfg, embeddings(1), 1).unwrap();
            let ids = [0, 2, 0];
            let ctx = [vec![0, 3]];
            let input = ModelInput::new(&ids).with_context(&ctx);
            m.loss_and_accumulate(&input, 2, 1.0, &mut RngStream::new(1))
                .unwrap();
            let table = &m.embeddings().table;
            assert!(table.grad.row(0).iter().all(|&g| g == 0.0));
            assert!(table.grad.row(2).iter().any(|&g| g != 0.0));
        }
    }

    #[test]
    fn context_gradient_reaches_embeddings() {
        let mut m = instance(Family::Dan, ContextMode::Avg, false, 2);
        let ids = [2];
        let ctx = [vec![7]];
        m.loss_and_accumulate(
            &ModelInput::new(&ids).with_context(&ctx),
            0,
            1.0,
            &mut RngStream::new(3),
        )
        .unwrap();
        assert!(m.embeddings().table.grad.row(7).iter().any(|&g| g != 0.0));
    }

    #[test]
    fn act_prediction_is_a_distribution() {
        let mut cfg = small_config(Family::Dan, ContextMode::Avg, false);
        cfg.task = Task::DialogAct;
        let Classifier::Dan(m) = Classifier::new(cfg, embeddings(3), 3).unwrap() else {
            unreachable!()
        };
        let ctx = [vec![4]];
        let input = ModelInput::new(&[2, 3]).with_context(&ctx);
        let p = predict_dialog_act(&m, &input).unwrap();
        assert_eq!(p.len(), 14);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(p, predict_dialog_act(&m, &input).unwrap());

        let topic = DanModel::new(
            small_config(Family::Dan, ContextMode::None, false),
            embeddings(3),
            3,
        )
        .unwrap();
        assert!(matches!(
            predict_dialog_act(&topic, &input),
            Err(Error::LabelSpace(_))
        ));
    }
}
