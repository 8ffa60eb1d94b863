//! Fully connected layer `act(W x + b)` with its hand-derived backward pass.

use super::tensor::{Parameter, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// Values retained by [`dense_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub pre_activation: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dx: Vec<f64>,
    pub dw: Tensor,
    pub db: Vec<f64>,
}

pub fn dense_forward(
    x: &[f64],
    w: &Parameter,
    b: &Parameter,
    activation: Activation,
) -> Result<(Vec<f64>, DenseCache)> {
    let (out, _) = w.shape();
    if b.len() != out {
        return Err(Error::Shape(format!(
            "bias of length {} for a layer with {out} outputs",
            b.len()
        )));
    }
    let mut pre = w.value.matvec(x)?;
    for (p, bi) in pre.iter_mut().zip(b.value.as_slice()) {
        *p += bi;
    }
    let y = match activation {
        Activation::Relu => pre.iter().map(|&v| if v < 0.0 { 0.0 } else { v }).collect(),
        Activation::None => pre.clone(),
    };
    Ok((
        y,
        DenseCache {
            input: x.to_vec(),
            pre_activation: pre,
            activation,
        },
    ))
}

fn gate(cache: &DenseCache, dy: &[f64]) -> Result<Vec<f64>> {
    if dy.len() != cache.pre_activation.len() {
        return Err(Error::Shape(format!(
            "upstream gradient of length {} for a layer with {} outputs",
            dy.len(),
            cache.pre_activation.len()
        )));
    }
    Ok(match cache.activation {
        Activation::Relu => dy
            .iter()
            .zip(&cache.pre_activation)
            .map(|(&g, &p)| if p > 0.0 { g } else { 0.0 })
            .collect(),
        Activation::None => dy.to_vec(),
    })
}

/// Gradients of the layer output with respect to input, weights and bias.
pub fn dense_backward(w: &Parameter, cache: &DenseCache, dy: &[f64]) -> Result<DenseGrads> {
    let dz = gate(cache, dy)?;
    let (rows, cols) = w.shape();
    if cache.input.len() != cols {
        return Err(Error::Shape("cache does not match weight matrix".into()));
    }
    let mut dw = Tensor::zeros(rows, cols);
    dw.add_outer(1.0, &dz, &cache.input);
    let dx = w.value.matvec_t(&dz)?;
    Ok(DenseGrads { dx, dw, db: dz })
}

/// Like [`dense_backward`] but adds `dW`, `db` into the parameters' gradient
/// accumulators and returns only `dx`.
pub fn dense_backward_accumulate(
    w: &mut Parameter,
    b: &mut Parameter,
    cache: &DenseCache,
    dy: &[f64],
) -> Result<Vec<f64>> {
    let dz = gate(cache, dy)?;
    if cache.input.len() != w.shape().1 {
        return Err(Error::Shape("cache does not match weight matrix".into()));
    }
    w.grad.add_outer(1.0, &dz, &cache.input);
    for (g, d) in b.grad.as_mut_slice().iter_mut().zip(&dz) {
        *g += d;
    }
    w.value.matvec_t(&dz)
}
