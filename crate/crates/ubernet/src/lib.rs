//! Short-term demand forecasting on fixed-interval panels.
//!
//! The crate is organised as a pipeline:
//!
//! * [`panel`] — turns raw pickup events plus feature tables into a regular
//!   time-slot panel (aggregation, joins, imputation, normalization,
//!   windowing, and a synthetic generator).
//! * [`net`] — the forecasting network: per-feature embeddings feeding a
//!   stack of dilated causal convolution blocks with gated activations and
//!   residual/skip connections.
//! * [`train`] — loss, hand-derived backpropagation, finite-difference
//!   gradient checking, SGD fitting, iterative multi-step inference, and
//!   JSON checkpoints.
//! * [`eval`] — metrics, rolling cross-validation, feature-set evaluation,
//!   ablation, permutation importance, partial dependence, and error
//!   breakdowns.
//! * [`baselines`] — seasonal naive, persistence, and ridge-regularized ARX
//!   reference models evaluated through the same harness.
//!
//! Numeric kernels are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the concrete aliases below are what the harness and CLI use.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod net;
pub mod panel;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Concrete tensor type used by the data pipeline and CLI.
pub type Tensor64 = tensor::Tensor<f64>;

/// Concrete network type used by the harness and CLI.
pub type Network64 = net::Network<f64>;

/// Concrete window-batch type used by the harness and CLI.
pub type WindowBatch64 = panel::WindowBatch<f64>;

/// Stable 64-bit FNV-1a hash, used to derive per-job seeds from a base seed
/// and a job key so parallel work stays reproducible.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in base.to_le_bytes() {
        h = (h ^ b as u64).wrapping_mul(PRIME);
    }
    for b in key.as_bytes() {
        h = (h ^ *b as u64).wrapping_mul(PRIME);
    }
    h
}
