//! Training: loss, hand-derived backpropagation, finite-difference gradient
//! verification, SGD fitting, iterative inference, and checkpoints.

pub mod backprop;
pub mod checkpoint;
pub mod fit;
pub mod gradcheck;
pub mod infer;
pub mod loss;

pub use backprop::batch_gradient;
pub use checkpoint::{load_checkpoint, load_checkpoint_for_schema, save_checkpoint, Checkpoint, CheckpointMeta};
pub use fit::{fit, FitConfig, FitReport};
pub use gradcheck::{grad_check, verify_gradients, GradCheckConfig, GradCheckReport};
pub use infer::{predict_iterative, IterativeForecast};
pub use loss::{batch_loss, penalty, LossConfig};

use crate::error::{Error, Result};
use crate::net::{Network, NetworkConfig};
use crate::scalar::Scalar;

/// Gradient of the loss with respect to every network parameter, stored in
/// a structure that mirrors the network itself so the two can be iterated
/// in lockstep.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    pub arrays: Network<S>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros(config: &NetworkConfig) -> Result<Gradients<S>> {
        Ok(Gradients { arrays: Network::zeros(config)? })
    }

    /// Accumulates `other` into `self` elementwise.
    pub fn add_assign(&mut self, other: &Gradients<S>) -> Result<()> {
        let theirs = other.arrays.params();
        for (mine, theirs) in self.arrays.params_mut().into_iter().zip(theirs) {
            mine.tensor.add_assign(theirs.tensor)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: S) {
        for p in self.arrays.params_mut() {
            p.tensor.scale(factor);
        }
    }

    /// Largest absolute gradient entry, for diagnostics.
    pub fn max_abs(&self) -> f64 {
        self.arrays
            .params()
            .iter()
            .flat_map(|p| p.tensor.data().iter())
            .fold(0.0f64, |acc, v| acc.max(v.to64().abs()))
    }

    /// Fails with a numeric error naming the offending parameter array if
    /// any gradient entry is NaN or infinite.
    pub fn ensure_finite(&self) -> Result<()> {
        for p in self.arrays.params() {
            if p.tensor.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!(
                    "gradient for parameter array '{}' is not finite",
                    p.name
                )));
            }
        }
        Ok(())
    }
}

/// One SGD update: `w ← w − lr · g` for every parameter.
pub fn apply_update<S: Scalar>(net: &mut Network<S>, grads: &Gradients<S>, lr: S) {
    let gs = grads.arrays.params();
    for (p, g) in net.params_mut().into_iter().zip(gs) {
        for (w, gv) in p.tensor.data_mut().iter_mut().zip(g.tensor.data()) {
            *w -= lr * *gv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::InputSpec;

    fn cfg() -> NetworkConfig {
        NetworkConfig::desk(vec![InputSpec::continuous("p")], 4)
    }

    #[test]
    fn gradients_accumulate_and_scale() {
        let mut a = Gradients::<f64>::zeros(&cfg()).unwrap();
        let mut b = Gradients::<f64>::zeros(&cfg()).unwrap();
        a.arrays.embed.mix.data_mut()[0] = 2.0;
        b.arrays.embed.mix.data_mut()[0] = 3.0;
        a.add_assign(&b).unwrap();
        assert_eq!(a.arrays.embed.mix.data()[0], 5.0);
        a.scale(0.5);
        assert_eq!(a.arrays.embed.mix.data()[0], 2.5);
        assert_eq!(a.max_abs(), 2.5);
    }

    #[test]
    fn non_finite_gradient_is_reported_with_its_array_name() {
        let mut g = Gradients::<f64>::zeros(&cfg()).unwrap();
        g.arrays.blocks[1].conv_gate.kernel.data_mut()[3] = f64::NAN;
        let err = g.ensure_finite().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("block1.conv_gate.kernel"), "{msg}");
    }

    #[test]
    fn apply_update_moves_against_the_gradient() {
        let config = cfg();
        let mut net = Network::<f64>::init(&config, 3).unwrap();
        let before = net.embed.mix.data()[0];
        let mut g = Gradients::<f64>::zeros(&config).unwrap();
        g.arrays.embed.mix.data_mut()[0] = 10.0;
        apply_update(&mut net, &g, 0.01);
        assert_eq!(net.embed.mix.data()[0], before - 0.1);
    }
}
