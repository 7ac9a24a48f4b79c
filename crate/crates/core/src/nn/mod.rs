//! Minimal dense network engine used by the recency classifier.
//!
//! A [`MlpModel`] is a stack of dense layers with ReLU on hidden layers and a
//! single sigmoid output, trained with mean binary cross-entropy and Adam.
//! Everything is `f64` and single-threaded.

mod adam;
pub mod gradcheck;
mod mlp;
mod tensor;

pub use adam::AdamState;
pub use mlp::{bce_loss, init_weights, Checkpoint, ForwardCache, Gradients, MlpModel};
pub use tensor::Tensor2;

/// Clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
