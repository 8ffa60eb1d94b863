#![allow(dead_code)]

use convtopic::corpus::Task;
use convtopic::models::{Classifier, ContextMode, Family, ModelConfig, ModelInput};
use convtopic::numerics::{
    cross_entropy, dense_backward, dense_forward, grad_check, grad_check_with_floor, lstm_cell,
    lstm_cell_backward, softmax, Activation, LstmParams, Parameter, RngStream, Tensor,
};
use convtopic::text::EmbeddingMatrix;

pub const H: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor for whole-model checks.
pub const MODEL_FLOOR: f64 = 1e-5;
pub const VOCAB: usize = 10;

fn uniform_vec(rng: &mut RngStream, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_range(-scale, scale)).collect()
}

fn random_ids(rng: &mut RngStream, n: usize) -> Vec<u32> {
    (0..n).map(|_| 1 + rng.below(VOCAB - 1) as u32).collect()
}

/// Sum of `y * weights` turns a vector-valued layer into a scalar loss.
fn weighted(y: &[f64], weights: &[f64]) -> f64 {
    y.iter().zip(weights).map(|(a, b)| a * b).sum()
}

pub fn dense_instance_error(seed: u64) -> f64 {
    let mut rng = RngStream::derived(seed, 0xde);
    let (n_in, n_out) = (2 + rng.below(5), 1 + rng.below(5));
    let act = if seed.is_multiple_of(2) {
        Activation::Relu
    } else {
        Activation::None
    };
    let w = Parameter::new(Tensor::uniform(n_out, n_in, 1.0, &mut rng));
    let b = Parameter::new(Tensor::uniform(1, n_out, 1.0, &mut rng));
    let x = uniform_vec(&mut rng, n_in, 1.0);
    let up = uniform_vec(&mut rng, n_out, 1.0);
    let (_, cache) = dense_forward(&x, &w, &b, act).unwrap();
    let g = dense_backward(&w, &cache, &up).unwrap();
    let loss = |x: &[f64], w: &Parameter, b: &Parameter| {
        weighted(&dense_forward(x, w, b, act).unwrap().0, &up)
    };
    let ex = grad_check(|v| loss(v, &w, &b), &g.dx, &x, H);
    let ew = grad_check(
        |v| {
            let mut w2 = w.clone();
            w2.value.as_mut_slice().copy_from_slice(v);
            loss(&x, &w2, &b)
        },
        g.dw.as_slice(),
        w.value.as_slice(),
        H,
    );
    let eb = grad_check(
        |v| {
            let mut b2 = b.clone();
            b2.value.as_mut_slice().copy_from_slice(v);
            loss(&x, &w, &b2)
        },
        &g.db,
        b.value.as_slice(),
        H,
    );
    ex.max(ew).max(eb)
}

pub fn lstm_instance_error(seed: u64) -> f64 {
    let mut rng = RngStream::derived(seed, 0x15);
    let (n_in, hd) = (1 + rng.below(4), 1 + rng.below(4));
    let params = LstmParams::init(n_in, hd, 1.0, &mut rng);
    let x = uniform_vec(&mut rng, n_in, 1.0);
    let h = uniform_vec(&mut rng, hd, 1.0);
    let c = uniform_vec(&mut rng, hd, 1.0);
    let (uh, uc) = (
        uniform_vec(&mut rng, hd, 1.0),
        uniform_vec(&mut rng, hd, 1.0),
    );
    let loss = |x: &[f64], h: &[f64], c: &[f64], p: &LstmParams| {
        let (h2, c2, _) = lstm_cell(x, h, c, p).unwrap();
        weighted(&h2, &uh) + weighted(&c2, &uc)
    };
    let (_, _, cache) = lstm_cell(&x, &h, &c, &params).unwrap();
    let g = lstm_cell_backward(&params, &cache, &uh, &uc).unwrap();
    let mut worst = grad_check(|v| loss(v, &h, &c, &params), &g.dx, &x, H);
    worst = worst.max(grad_check(|v| loss(&x, v, &c, &params), &g.dh_prev, &h, H));
    worst = worst.max(grad_check(|v| loss(&x, &h, v, &params), &g.dc_prev, &c, H));
    worst = worst.max(grad_check(
        |v| {
            let mut p = params.clone();
            p.weights.value.as_mut_slice().copy_from_slice(v);
            loss(&x, &h, &c, &p)
        },
        g.dw.as_slice(),
        params.weights.value.as_slice(),
        H,
    ));
    worst.max(grad_check(
        |v| {
            let mut p = params.clone();
            p.bias.value.as_mut_slice().copy_from_slice(v);
            loss(&x, &h, &c, &p)
        },
        &g.db,
        params.bias.value.as_slice(),
        H,
    ))
}

pub fn softmax_ce_instance_error(seed: u64) -> f64 {
    let mut rng = RngStream::derived(seed, 0x5c);
    let k = 2 + rng.below(12);
    let logits = uniform_vec(&mut rng, k, 3.0);
    let label = rng.below(k);
    let probs = softmax(&logits).unwrap();
    let (_, dlogits) = cross_entropy(&probs, label).unwrap();
    grad_check(
        |v| cross_entropy(&softmax(v).unwrap(), label).unwrap().0,
        &dlogits,
        &logits,
        H,
    )
}

/// A small model with order-one weights and the input it is checked on.
pub struct ModelInstance {
    pub model: Classifier,
    pub ids: Vec<u32>,
    pub context: Vec<Vec<u32>>,
    pub act: Option<Vec<f64>>,
    pub label: usize,
}

impl ModelInstance {
    pub fn new(family: Family, context: ContextMode, act: bool, seed: u64) -> Self {
        let mut rng = RngStream::derived(seed, 0x3a);
        let mut cfg = ModelConfig::defaults(family, Task::Topic);
        cfg.embed_dim = 4;
        cfg.hidden = 5;
        cfg.context = context;
        cfg.act_feature = act;
        cfg.dropout = 0.3;
        let mut table = Tensor::uniform(VOCAB, 4, 0.5, &mut rng);
        table.row_mut(0).fill(0.0);
        let emb = EmbeddingMatrix::from_table(table, true);
        let mut model = Classifier::new(cfg, emb, seed).unwrap();
        for (name, p) in model.parameters_mut() {
            if name != "embeddings" {
                let (r, c) = p.shape();
                p.value = Tensor::uniform(r, c, 1.0, &mut rng);
            }
        }
        let n = 1 + rng.below(4);
        let ids = random_ids(&mut rng, n);
        let turns = if context == ContextMode::None {
            0
        } else {
            1 + rng.below(3)
        };
        let context = (0..turns)
            .map(|_| {
                let n = 1 + rng.below(4);
                random_ids(&mut rng, n)
            })
            .collect();
        let act = act.then(|| {
            let raw: Vec<f64> = (0..14).map(|_| rng.uniform()).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|v| v / total).collect()
        });
        let label = rng.below(12);
        ModelInstance {
            model,
            ids,
            context,
            act,
            label,
        }
    }

    pub fn input(&self) -> ModelInput<'_> {
        let input = ModelInput::new(&self.ids).with_context(&self.context);
        match &self.act {
            Some(a) => input.with_act(a),
            None => input,
        }
    }

    fn loss_with(&self, model: &mut Classifier) -> f64 {
        model
            .loss_and_accumulate(&self.input(), self.label, 1.0, &mut RngStream::new(77))
            .unwrap()
    }

    /// Worst relative error per named parameter block of the full loss
    /// (dropout mask fixed by reseeding).
    pub fn parameter_errors(&self) -> Vec<(&'static str, f64)> {
        let mut analytic = self.model.clone();
        analytic.zero_grad();
        self.loss_with(&mut analytic);
        analytic
            .parameters()
            .into_iter()
            .enumerate()
            .map(|(idx, (name, p))| {
                let f = |v: &[f64]| {
                    let mut probe = self.model.clone();
                    probe.parameters_mut()[idx]
                        .1
                        .value
                        .as_mut_slice()
                        .copy_from_slice(v);
                    self.loss_with(&mut probe)
                };
                let x = p.value.as_slice().to_vec();
                (
                    name,
                    grad_check_with_floor(f, p.grad.as_slice(), &x, H, MODEL_FLOOR),
                )
            })
            .collect()
    }
}

/// Worst error over all blocks named `block` (or all blocks if `None`)
/// across `n` seeded instances.
pub fn worst_model_error(
    family: Family,
    context: ContextMode,
    act: bool,
    block: Option<&str>,
    n: u64,
) -> f64 {
    (0..n)
        .flat_map(|seed| ModelInstance::new(family, context, act, seed).parameter_errors())
        .filter(|(name, _)| block.is_none_or(|b| b == *name))
        .map(|(_, e)| e)
        .fold(0.0, f64::max)
}

pub fn worst_over<F: Fn(u64) -> f64>(n: u64, f: F) -> f64 {
    (0..n).map(f).fold(0.0, f64::max)
}
