//! Single LSTM cell.
//!
//! Gates are computed from the concatenation `[x; h_prev]` with one weight
//! matrix of shape `4H x (D + H)`, rows ordered input, forget, candidate,
//! output:
//!
//! ```text
//! i = sigmoid(z_i)   f = sigmoid(z_f)   g = tanh(z_g)   o = sigmoid(z_o)
//! c = f * c_prev + i * g
//! h = o * tanh(c)
//! ```

use super::ops::sigmoid;
use super::tensor::{Parameter, Tensor};
use super::RngStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub weights: Parameter,
    pub bias: Parameter,
    input_dim: usize,
    hidden: usize,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmParams {
            weights: Parameter::zeros(4 * hidden, input_dim + hidden),
            bias: Parameter::zeros(4 * hidden, 1),
            input_dim,
            hidden,
        }
    }

    /// Uniform weights in `[-scale, scale)`, zero bias except forget gate = 1.
    pub fn init(input_dim: usize, hidden: usize, scale: f64, rng: &mut RngStream) -> Self {
        let mut p = LstmParams::zeros(input_dim, hidden);
        p.weights.value = Tensor::uniform(4 * hidden, input_dim + hidden, scale, rng);
        for r in hidden..2 * hidden {
            p.bias.value.set(r, 0, 1.0);
        }
        p
    }

    pub fn from_parts(weights: Parameter, bias: Parameter, input_dim: usize) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows % 4 != 0 || cols != input_dim + rows / 4 || bias.len() != rows {
            return Err(Error::Shape(format!(
                "LSTM weights {rows}x{cols}, bias {}, input {input_dim}",
                bias.len()
            )));
        }
        Ok(LstmParams {
            weights,
            bias,
            input_dim,
            hidden: rows / 4,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// `[x; h_prev]`
    joint: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
    pub dw: Tensor,
    pub db: Vec<f64>,
}

pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
    let hd = params.hidden;
    if x.len() != params.input_dim || h_prev.len() != hd || c_prev.len() != hd {
        return Err(Error::Shape(format!(
            "LSTM cell expects x:{} h:{hd} c:{hd}, got x:{} h:{} c:{}",
            params.input_dim,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut joint = Vec::with_capacity(x.len() + hd);
    joint.extend_from_slice(x);
    joint.extend_from_slice(h_prev);
    let mut z = params.weights.value.matvec(&joint)?;
    for (zi, bi) in z.iter_mut().zip(params.bias.value.as_slice()) {
        *zi += bi;
    }
    let i: Vec<f64> = z[..hd].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = z[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = z[2 * hd..3 * hd].iter().map(|v| v.tanh()).collect();
    let o: Vec<f64> = z[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..hd).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
    Ok((
        h,
        c,
        LstmCache {
            joint,
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
        },
    ))
}

/// Gradient of the pre-activations `z` given upstream `dh`, `dc`.
fn gate_grads(cache: &LstmCache, dh: &[f64], dc_next: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hd = cache.i.len();
    let mut dz = vec![0.0; 4 * hd];
    let mut dc_prev = vec![0.0; hd];
    for k in 0..hd {
        let (i, f, g, o, tc) = (
            cache.i[k],
            cache.f[k],
            cache.g[k],
            cache.o[k],
            cache.tanh_c[k],
        );
        let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
        dz[k] = dc * g * i * (1.0 - i);
        dz[hd + k] = dc * cache.c_prev[k] * f * (1.0 - f);
        dz[2 * hd + k] = dc * i * (1.0 - g * g);
        dz[3 * hd + k] = dh[k] * tc * o * (1.0 - o);
        dc_prev[k] = dc * f;
    }
    (dz, dc_prev)
}

fn check_upstream(params: &LstmParams, dh: &[f64], dc: &[f64]) -> Result<()> {
    if dh.len() != params.hidden || dc.len() != params.hidden {
        return Err(Error::Shape(format!(
            "LSTM upstream gradients of length {}/{} for hidden {}",
            dh.len(),
            dc.len(),
            params.hidden
        )));
    }
    Ok(())
}

pub fn lstm_cell_backward(
    params: &LstmParams,
    cache: &LstmCache,
    dh: &[f64],
    dc: &[f64],
) -> Result<LstmGrads> {
    check_upstream(params, dh, dc)?;
    let (dz, dc_prev) = gate_grads(cache, dh, dc);
    let mut dw = Tensor::zeros(4 * params.hidden, params.input_dim + params.hidden);
    dw.add_outer(1.0, &dz, &cache.joint);
    let djoint = params.weights.value.matvec_t(&dz)?;
    let (dx, dh_prev) = djoint.split_at(params.input_dim);
    Ok(LstmGrads {
        dx: dx.to_vec(),
        dh_prev: dh_prev.to_vec(),
        dc_prev,
        dw,
        db: dz,
    })
}

/// Backward pass that accumulates `dW`, `db` into the parameters and returns
/// `(dx, dh_prev, dc_prev)`.
pub fn lstm_cell_backward_accumulate(
    params: &mut LstmParams,
    cache: &LstmCache,
    dh: &[f64],
    dc: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_upstream(params, dh, dc)?;
    let (dz, dc_prev) = gate_grads(cache, dh, dc);
    params.weights.grad.add_outer(1.0, &dz, &cache.joint);
    for (g, d) in params.bias.grad.as_mut_slice().iter_mut().zip(&dz) {
        *g += d;
    }
    let mut djoint = params.weights.value.matvec_t(&dz)?;
    let dh_prev = djoint.split_off(params.input_dim);
    Ok((djoint, dh_prev, dc_prev))
}
