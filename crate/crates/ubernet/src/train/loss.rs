//! Training objective: mean squared error over a batch of windows plus an
//! optional weight penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Head, HeadOutput, Network};
use crate::panel::Window;
use crate::scalar::Scalar;

/// Penalty coefficients. The squared (ridge) term is
/// `(l2 / 2) · Σ w²` and the optional absolute (lasso) term `l1 · Σ |w|`,
/// both summed over weight arrays only — biases and normalization
/// parameters are never penalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub l2: f64,
    #[serde(default)]
    pub l1: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { l2: 0.0, l1: 0.0 }
    }
}

impl LossConfig {
    pub fn ridge(l2: f64) -> LossConfig {
        LossConfig { l2, l1: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l2.is_finite() && self.l2 >= 0.0 && self.l1.is_finite() && self.l1 >= 0.0) {
            return Err(Error::contract(format!(
                "penalty coefficients must be finite and non-negative, got l2={} l1={}",
                self.l2, self.l1
            )));
        }
        Ok(())
    }
}

/// The penalty term alone: `(l2/2)·Σw² + l1·Σ|w|` over penalized arrays.
pub fn penalty<S: Scalar>(net: &Network<S>, cfg: &LossConfig) -> S {
    if cfg.l2 == 0.0 && cfg.l1 == 0.0 {
        return S::zero();
    }
    let mut sq = S::zero();
    let mut abs = S::zero();
    for p in net.params() {
        if !p.penalized {
            continue;
        }
        for w in p.tensor.data() {
            sq += *w * *w;
            abs += w.abs();
        }
    }
    S::of(cfg.l2 / 2.0) * sq + S::of(cfg.l1) * abs
}

/// Per-window data loss given the network output.
pub(crate) fn window_loss<S: Scalar>(head: &Head, output: &HeadOutput<S>, target: S) -> Result<S> {
    match output {
        HeadOutput::Scalar(pred) => {
            let d = target - *pred;
            Ok(d * d)
        }
        HeadOutput::Probs(probs) => {
            let bin = head
                .bin_index(target.to64())
                .ok_or_else(|| Error::contract("probability output from a regression head"))?;
            let p = probs[bin];
            // Cross-entropy; probabilities from a softmax are strictly
            // positive, but clamp defensively against underflow.
            let floor = S::of(1e-300);
            Ok(-(p.max(floor)).ln())
        }
    }
}

/// Full batch objective: `(1/T) Σ_t data_loss_t + penalty`. For the
/// regression head the data loss is the squared error; for the softmax head
/// it is the cross-entropy of the target's bin.
pub fn batch_loss<S: Scalar, W: std::borrow::Borrow<Window<S>>>(
    net: &Network<S>,
    windows: &[W],
    cfg: &LossConfig,
) -> Result<S> {
    if windows.is_empty() {
        return Err(Error::contract("loss over an empty window batch is undefined"));
    }
    cfg.validate()?;
    let mut total = S::zero();
    for w in windows {
        let w = w.borrow();
        let output = net.predict(&w.input)?;
        total += window_loss(&net.config.head, &output, w.target)?;
    }
    let mean = total / S::of(windows.len() as f64);
    Ok(mean + penalty(net, cfg))
}
