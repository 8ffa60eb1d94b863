use super::{
    avg_context, avg_context_backward, glorot, ContextMode, Family, ModelConfig, ModelInput,
};
use crate::error::{Error, Result};
use crate::numerics::{
    dense_backward_accumulate, dense_forward, dot, dropout, softmax, softmax_backward, Activation,
    DenseCache, Parameter, RngStream, Tensor,
};
use crate::text::EmbeddingMatrix;

/// Attentional deep averaging network.
///
/// Row `k` of the attention table holds one weight per vocabulary entry;
/// the utterance's weights `w[k]` are softmaxed into `alpha[k]` and
/// `s_k = (1/L) sum_i alpha[k][i] * [e_i; ctx; act]`. Each `s_k` goes through
/// the same ReLU layer and a single-output scorer. The logit of topic `k` is
/// that score plus `log((1/L) sum_i exp(w[k][i]))`, so a row that weights the
/// utterance's words highly counts as evidence for its topic; the `K` logits
/// are softmaxed.
#[derive(Debug, Clone, PartialEq)]
pub struct AdanModel {
    pub config: ModelConfig,
    pub embeddings: EmbeddingMatrix,
    pub attention: Parameter,
    pub w1: Parameter,
    pub b1: Parameter,
    pub w0: Parameter,
    pub b0: Parameter,
}

#[derive(Debug, Clone)]
pub(crate) struct AdanCache {
    pub alpha: Vec<Vec<f64>>,
    hidden: Vec<DenseCache>,
    masks: Vec<Vec<f64>>,
    output: Vec<DenseCache>,
    pub probs: Vec<f64>,
}

impl AdanModel {
    pub fn new(config: ModelConfig, embeddings: EmbeddingMatrix, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.family != Family::Adan {
            return Err(Error::InvalidArgument(
                "ADAN model needs an `adan` configuration".into(),
            ));
        }
        if embeddings.dim() != config.embed_dim {
            return Err(Error::Shape(format!(
                "embeddings of width {} for embed_dim {}",
                embeddings.dim(),
                config.embed_dim
            )));
        }
        let mut rng = RngStream::derived(seed, 0xada);
        let din = Self::input_dim(&config);
        let h = config.hidden;
        Ok(AdanModel {
            attention: Parameter::zeros(config.num_labels(), embeddings.vocab_size()),
            w1: Parameter::new(Tensor::uniform(h, din, glorot(h, din), &mut rng)),
            b1: Parameter::zeros(h, 1),
            w0: Parameter::new(Tensor::uniform(1, h, glorot(1, h), &mut rng)),
            b0: Parameter::zeros(1, 1),
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
        mut rng: Option<&mut RngStream>,
    ) -> Result<AdanCache> {
        let act = input.validate(&self.config, self.embeddings.vocab_size())?;
        let ids = input.token_ids;
        let inv_l = 1.0 / ids.len() as f64;
        let d = self.config.embed_dim;
        // replicated extras average to extras / L under any attention row
        let mut extras = Vec::new();
        if self.config.context == ContextMode::Avg {
            extras.extend(avg_context(input, &self.embeddings));
        }
        if let Some(a) = act {
            extras.extend_from_slice(a);
        }
        extras.iter_mut().for_each(|v| *v *= inv_l);

        let k = self.attention.shape().0;
        let mut cache = AdanCache {
            alpha: Vec::with_capacity(k),
            hidden: Vec::with_capacity(k),
            masks: Vec::with_capacity(k),
            output: Vec::with_capacity(k),
            probs: Vec::new(),
        };
        let mut logits = Vec::with_capacity(k);
        for row in 0..k {
            let weights: Vec<f64> = ids
                .iter()
                .map(|&id| self.attention.value.get(row, id as usize))
                .collect();
            let alpha = softmax(&weights)?;
            let evidence = log_mean_exp(&weights);
            let mut s = vec![0.0; d];
            for (&id, &a) in ids.iter().zip(&alpha) {
                crate::numerics::axpy(a * inv_l, self.embeddings.row(id), &mut s);
            }
            s.extend_from_slice(&extras);
            let (h, hidden) = dense_forward(&s, &self.w1, &self.b1, Activation::Relu)?;
            let (h, mask) = match rng.as_deref_mut() {
                Some(r) => dropout(&h, self.config.dropout, r, true)?,
                None => {
                    let n = h.len();
                    (h, vec![1.0; n])
                }
            };
            let (score, output) = dense_forward(&h, &self.w0, &self.b0, Activation::None)?;
            logits.push(score[0] + evidence);
            cache.alpha.push(alpha);
            cache.hidden.push(hidden);
            cache.masks.push(mask);
            cache.output.push(output);
        }
        cache.probs = softmax(&logits)?;
        Ok(cache)
    }

    pub(crate) fn backward(
        &mut self,
        input: &ModelInput,
        cache: &AdanCache,
        dlogits: &[f64],
    ) -> Result<()> {
        let ids = input.token_ids;
        let inv_l = 1.0 / ids.len() as f64;
        let d = self.config.embed_dim;
        let mut d_emb = vec![vec![0.0; d]; ids.len()];
        let mut d_ctx = vec![0.0; d];
        for (row, &dl) in dlogits.iter().enumerate() {
            let dh =
                dense_backward_accumulate(&mut self.w0, &mut self.b0, &cache.output[row], &[dl])?;
            let dh: Vec<f64> = dh
                .iter()
                .zip(&cache.masks[row])
                .map(|(g, m)| g * m)
                .collect();
            let ds =
                dense_backward_accumulate(&mut self.w1, &mut self.b1, &cache.hidden[row], &dh)?;
            let alpha = &cache.alpha[row];
            let ds_e = &ds[..d];
            let mut dalpha = Vec::with_capacity(ids.len());
            for (i, &id) in ids.iter().enumerate() {
                dalpha.push(inv_l * dot(ds_e, self.embeddings.row(id)));
                crate::numerics::axpy(inv_l * alpha[i], ds_e, &mut d_emb[i]);
            }
            let dw = softmax_backward(alpha, &dalpha);
            let grad_row = self.attention.grad.row_mut(row);
            for ((&id, g), a) in ids.iter().zip(dw).zip(alpha) {
                grad_row[id as usize] += g + dl * a;
            }
            if self.config.context == ContextMode::Avg {
                crate::numerics::axpy(inv_l, &ds[d..2 * d], &mut d_ctx);
            }
        }
        if self.embeddings.trainable {
            for (&id, g) in ids.iter().zip(&d_emb) {
                self.embeddings.accumulate_row_grad(id, 1.0, g);
            }
        }
        if self.config.context == ContextMode::Avg {
            avg_context_backward(input, &mut self.embeddings, &d_ctx);
        }
        Ok(())
    }

    pub fn parameters(&self) -> Vec<(&'static str, &Parameter)> {
        vec![
            ("embeddings", &self.embeddings.table),
            ("attention", &self.attention),
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w0", &self.w0),
            ("b0", &self.b0),
        ]
    }

    pub fn parameters_mut(&mut self) -> Vec<(&'static str, &mut Parameter)> {
        vec![
            ("embeddings", &mut self.embeddings.table),
            ("attention", &mut self.attention),
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w0", &mut self.w0),
            ("b0", &mut self.b0),
        ]
    }
}

fn log_mean_exp(w: &[f64]) -> f64 {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + (w.iter().map(|v| (v - max).exp()).sum::<f64>() / w.len() as f64).ln()
}

/// Class distribution and the `K x L` attention matrix.
pub fn adan_forward(
    model: &AdanModel,
    input: &ModelInput,
    training: bool,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let cache = model.forward(input, training.then_some(rng))?;
    Ok((cache.probs, cache.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testutil::*;

    fn model(context: ContextMode, act: bool, seed: u64) -> AdanModel {
        AdanModel::new(
            small_config(Family::Adan, context, act),
            embeddings(seed),
            seed,
        )
        .unwrap()
    }

    fn randomize_attention(m: &mut AdanModel, seed: u64) {
        let (r, c) = m.attention.shape();
        m.attention.value = Tensor::uniform(r, c, 2.0, &mut RngStream::new(seed));
    }

    #[test]
    fn fresh_table_gives_uniform_attention() {
        let m = model(ContextMode::None, false, 1);
        let (_, alpha) = adan_forward(
            &m,
            &ModelInput::new(&[2, 3, 4, 5]),
            false,
            &mut RngStream::new(0),
        )
        .unwrap();
        assert_eq!(alpha.len(), 12);
        for row in alpha {
            assert_eq!(row, vec![0.25; 4]);
        }
    }

    #[test]
    fn attention_rows_are_distributions() {
        let mut rng = RngStream::new(9);
        for seed in 0..10 {
            let mut m = model(ContextMode::Avg, true, seed);
            randomize_attention(&mut m, seed);
            let ids = random_ids(&mut rng, 1 + seed as usize);
            let act = random_act(&mut rng);
            let ctx = [random_ids(&mut rng, 3)];
            let input = ModelInput::new(&ids).with_context(&ctx).with_act(&act);
            let (probs, alpha) = adan_forward(&m, &input, false, &mut rng).unwrap();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for row in alpha {
                assert_eq!(row.len(), ids.len());
                assert!(row.iter().all(|&a| a >= 0.0));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_token_scores_by_table_entry() {
        let mut m = model(ContextMode::None, false, 2);
        let before =
            adan_forward(&m, &ModelInput::new(&[6]), false, &mut RngStream::new(0)).unwrap();
        assert!(before.0.iter().all(|&p| (p - 1.0 / 12.0).abs() < 1e-12));
        m.attention.value.set(3, 6, 2.0);
        let after =
            adan_forward(&m, &ModelInput::new(&[6]), false, &mut RngStream::new(0)).unwrap();
        assert_eq!(after.1, vec![vec![1.0]; 12]);
        // same hidden score for every row, so the logit gap is the entry itself
        let ratio = after.0[3] / after.0[0];
        assert!((ratio - 2f64.exp()).abs() < 1e-9, "{ratio}");
    }

    #[test]
    fn fresh_table_adds_no_evidence() {
        let m = model(ContextMode::Avg, false, 5);
        let ids = [2, 3, 3, 7];
        let (p, _) =
            adan_forward(&m, &ModelInput::new(&ids), false, &mut RngStream::new(0)).unwrap();
        // identical rows give identical logits
        assert!(p.iter().all(|&v| (v - 1.0 / 12.0).abs() < 1e-12));
        assert!(log_mean_exp(&[0.0; 4]).abs() < 1e-15);
        assert!((log_mean_exp(&[1f64.ln(), 3f64.ln()]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn permutation_invariant() {
        let mut m = model(ContextMode::None, false, 4);
        randomize_attention(&mut m, 4);
        let mut rng = RngStream::new(4);
        let ids = random_ids(&mut rng, 5);
        let (p, _) = adan_forward(&m, &ModelInput::new(&ids), false, &mut rng).unwrap();
        for _ in 0..20 {
            let mut perm = ids.clone();
            rng.shuffle(&mut perm);
            let (q, _) = adan_forward(&m, &ModelInput::new(&perm), false, &mut rng).unwrap();
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn table_shape() {
        let m = model(ContextMode::None, false, 0);
        assert_eq!(m.attention.shape(), (12, VOCAB));
        assert_eq!(m.w0.shape(), (1, 5));
    }
}
