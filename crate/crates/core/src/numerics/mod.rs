//! Deterministic numeric core: tensors, layers with hand-written backward
//! passes, loss, dropout, ADAM and a finite-difference checker. Everything
//! runs in `f64`.

mod adam;
mod dense;
mod gradcheck;
mod lstm;
mod ops;
mod rng;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use dense::{
    dense_backward, dense_backward_accumulate, dense_forward, Activation, DenseCache, DenseGrads,
};
pub use gradcheck::{grad_check, grad_check_with_floor, relative_error};
pub use lstm::{
    lstm_cell, lstm_cell_backward, lstm_cell_backward_accumulate, LstmCache, LstmGrads, LstmParams,
};
pub use ops::{argmax, cross_entropy, dropout, sigmoid, softmax, softmax_backward};
pub use rng::RngStream;
pub use tensor::{axpy, dot, Parameter, Tensor};
