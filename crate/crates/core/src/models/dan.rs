use super::context::{mean_embedding, mean_embedding_backward};
use super::{
    avg_context, avg_context_backward, glorot, ContextMode, Family, ModelConfig, ModelInput,
};
use crate::error::{Error, Result};
use crate::numerics::{
    dense_backward_accumulate, dense_forward, dropout, softmax, Activation, DenseCache, Parameter,
    RngStream, Tensor,
};
use crate::text::EmbeddingMatrix;

/// Deep averaging network; with `avg` context and/or an act feature it is
/// the contextual variant.
#[derive(Debug, Clone, PartialEq)]
pub struct DanModel {
    pub config: ModelConfig,
    pub embeddings: EmbeddingMatrix,
    pub w1: Parameter,
    pub b1: Parameter,
    pub w0: Parameter,
    pub b0: Parameter,
}

#[derive(Debug, Clone)]
pub(crate) struct DanCache {
    hidden: DenseCache,
    mask: Vec<f64>,
    output: DenseCache,
    pub probs: Vec<f64>,
}

impl DanModel {
    pub fn new(config: ModelConfig, embeddings: EmbeddingMatrix, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.family != Family::Dan {
            return Err(Error::InvalidArgument(
                "DAN model needs a `dan` configuration".into(),
            ));
        }
        if embeddings.dim() != config.embed_dim {
            return Err(Error::Shape(format!(
                "embeddings of width {} for embed_dim {}",
                embeddings.dim(),
                config.embed_dim
            )));
        }
        let mut rng = RngStream::derived(seed, 0xda1);
        let din = Self::input_dim(&config);
        let (h, k) = (config.hidden, config.num_labels());
        Ok(DanModel {
            w1: Parameter::new(Tensor::uniform(h, din, glorot(h, din), &mut rng)),
            b1: Parameter::zeros(h, 1),
            w0: Parameter::new(Tensor::uniform(k, h, glorot(k, h), &mut rng)),
            b0: Parameter::zeros(k, 1),
            config,
            embeddings,
        })
    }

    pub fn input_dim(config: &ModelConfig) -> usize {
        let ctx = match config.context {
            ContextMode::Avg => config.embed_dim,
            _ => 0,
        };
        config.embed_dim + ctx + config.act_dim()
    }

    pub(crate) fn forward(
        &self,
        input: &ModelInput,
        rng: Option<&mut RngStream>,
    ) -> Result<DanCache> {
        let act = input.validate(&self.config, self.embeddings.vocab_size())?;
        let mut x = mean_embedding(&self.embeddings, input.token_ids);
        if self.config.context == ContextMode::Avg {
            x.extend(avg_context(input, &self.embeddings));
        }
        if let Some(a) = act {
            x.extend_from_slice(a);
        }
        let (h, hidden) = dense_forward(&x, &self.w1, &self.b1, Activation::Relu)?;
        let (h, mask) = match rng {
            Some(rng) => dropout(&h, self.config.dropout, rng, true)?,
            None => {
                let n = h.len();
                (h, vec![1.0; n])
            }
        };
        let (logits, output) = dense_forward(&h, &self.w0, &self.b0, Activation::None)?;
        let probs = softmax(&logits)?;
        Ok(DanCache {
            hidden,
            mask,
            output,
            probs,
        })
    }

    /// Accumulates parameter gradients given `dL/dlogits`.
    pub(crate) fn backward(
        &mut self,
        input: &ModelInput,
        cache: &DanCache,
        dlogits: &[f64],
    ) -> Result<()> {
        let dh = dense_backward_accumulate(&mut self.w0, &mut self.b0, &cache.output, dlogits)?;
        let dh: Vec<f64> = dh.iter().zip(&cache.mask).map(|(g, m)| g * m).collect();
        let dx = dense_backward_accumulate(&mut self.w1, &mut self.b1, &cache.hidden, &dh)?;
        let d = self.config.embed_dim;
        mean_embedding_backward(&mut self.embeddings, input.token_ids, &dx[..d]);
        if self.config.context == ContextMode::Avg {
            avg_context_backward(input, &mut self.embeddings, &dx[d..2 * d]);
        }
        Ok(())
    }

    pub fn parameters(&self) -> Vec<(&'static str, &Parameter)> {
        vec![
            ("embeddings", &self.embeddings.table),
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w0", &self.w0),
            ("b0", &self.b0),
        ]
    }

    pub fn parameters_mut(&mut self) -> Vec<(&'static str, &mut Parameter)> {
        vec![
            ("embeddings", &mut self.embeddings.table),
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w0", &mut self.w0),
            ("b0", &mut self.b0),
        ]
    }
}

/// Class distribution from a DAN; dropout is applied only when `training`.
pub fn dan_forward(
    model: &DanModel,
    input: &ModelInput,
    training: bool,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let cache = model.forward(input, training.then_some(rng))?;
    Ok(cache.probs)
}
