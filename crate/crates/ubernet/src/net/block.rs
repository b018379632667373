//! Residual block: normalize, bottleneck down, two parallel dilated
//! convolutions through a gated activation, project back up.

use crate::error::{Error, Result};
use crate::net::conv::Conv1D;
use crate::net::norm::{LayerNorm, NormCache};
use crate::net::Activation;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One block of the network. For input `x` of width `2k`:
///
/// ```text
/// h   = conv_in(layer_norm(x))          // 1×1, 2k → k
/// a_f = conv_filter(h)                  // 1×3 dilated, k → k
/// a_g = conv_gate(h)                    // 1×3 dilated, k → k
/// z   = tanh(a_f) ⊙ sigmoid(a_g)
/// τ   = conv_out(z)                     // 1×1, k → 2k
/// y   = x + τ        skip = τ
/// ```
///
/// Both dilated convolutions share the block's dilation factor. Under the
/// identity activation variant the gate is replaced by `z = a_f + a_g`,
/// keeping the block linear end to end.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock<S> {
    pub norm: LayerNorm<S>,
    pub conv_in: Conv1D<S>,
    pub conv_filter: Conv1D<S>,
    pub conv_gate: Conv1D<S>,
    pub conv_out: Conv1D<S>,
}

/// Every intermediate the reverse pass needs, kept per block.
#[derive(Debug, Clone)]
pub struct BlockTrace<S> {
    pub x: Tensor<S>,
    pub norm_cache: NormCache<S>,
    pub ln_out: Tensor<S>,
    pub h: Tensor<S>,
    pub a_f: Tensor<S>,
    pub a_g: Tensor<S>,
    pub z: Tensor<S>,
    pub tau: Tensor<S>,
}

/// Gradients for one block's parameters, same shapes as the block.
pub type BlockGrads<S> = ResidualBlock<S>;

pub const GATE_KERNEL_SIZE: usize = 3;

fn sigmoid<S: Scalar>(v: S) -> S {
    S::one() / (S::one() + (-v).exp())
}

impl<S: Scalar> ResidualBlock<S> {
    /// Zero-parameter block (layer norm at identity) for width `2k` in/out,
    /// bottleneck width `k`, and the given dilation.
    pub fn zeros(channels: usize, dilation: usize) -> ResidualBlock<S> {
        let wide = 2 * channels;
        ResidualBlock {
            norm: LayerNorm::identity(wide),
            conv_in: Conv1D::zeros(1, wide, channels, 1),
            conv_filter: Conv1D::zeros(GATE_KERNEL_SIZE, channels, channels, dilation),
            conv_gate: Conv1D::zeros(GATE_KERNEL_SIZE, channels, channels, dilation),
            conv_out: Conv1D::zeros(1, channels, wide, 1),
        }
    }

    /// Gradient container with every parameter array zeroed.
    pub fn zeros_like(&self) -> BlockGrads<S> {
        let mut g = self.clone();
        g.norm.gain.fill(S::zero());
        g.norm.shift.fill(S::zero());
        for conv in [&mut g.conv_in, &mut g.conv_filter, &mut g.conv_gate, &mut g.conv_out] {
            conv.kernel.fill(S::zero());
            conv.bias.fill(S::zero());
        }
        g
    }

    pub fn dilation(&self) -> usize {
        self.conv_filter.dilation
    }

    /// Forward pass; returns `(y, skip, trace)` where `y = x + τ(x)` and
    /// `skip = τ(x)`.
    pub fn forward(&self, x: &Tensor<S>, activation: Activation) -> Result<(Tensor<S>, Tensor<S>, BlockTrace<S>)> {
        let wide = self.norm.channels();
        if x.rank() != 2 || x.shape()[1] != wide {
            return Err(Error::contract(format!(
                "residual block expects input width {wide}, got shape {:?}",
                x.shape()
            )));
        }
        let affine_only = activation == Activation::Identity;
        let (ln_out, norm_cache) = self.norm.forward(x, affine_only)?;
        let h = self.conv_in.forward(&ln_out)?;
        let a_f = self.conv_filter.forward(&h)?;
        let a_g = self.conv_gate.forward(&h)?;
        let mut z = Tensor::zeros(a_f.shape());
        match activation {
            Activation::Gated => {
                for ((zv, fv), gv) in z.data_mut().iter_mut().zip(a_f.data()).zip(a_g.data()) {
                    *zv = fv.tanh() * sigmoid(*gv);
                }
            }
            Activation::Identity => {
                for ((zv, fv), gv) in z.data_mut().iter_mut().zip(a_f.data()).zip(a_g.data()) {
                    *zv = *fv + *gv;
                }
            }
        }
        let tau = self.conv_out.forward(&z)?;
        let mut y = x.clone();
        y.add_assign(&tau)?;
        let trace = BlockTrace { x: x.clone(), norm_cache, ln_out, h, a_f, a_g, z, tau: tau.clone() };
        Ok((y, tau, trace))
    }

    /// Reverse pass. `gy` is the gradient flowing into the block output `y`;
    /// `gskip` the gradient flowing into this block's skip contribution.
    /// Parameter gradients accumulate into `grads`; the return value is the
    /// gradient with respect to the block input `x`.
    pub fn backward(
        &self,
        trace: &BlockTrace<S>,
        gy: &Tensor<S>,
        gskip: &Tensor<S>,
        activation: Activation,
        grads: &mut BlockGrads<S>,
    ) -> Result<Tensor<S>> {
        // τ feeds both the residual sum and the skip connection.
        let mut gtau = gy.clone();
        gtau.add_assign(gskip)?;
        let gz = self.conv_out.backward(&trace.z, &gtau, &mut grads.conv_out.kernel, &mut grads.conv_out.bias)?;

        let mut ga_f = Tensor::zeros(trace.a_f.shape());
        let mut ga_g = Tensor::zeros(trace.a_g.shape());
        match activation {
            Activation::Gated => {
                for idx in 0..gz.len() {
                    let tf = trace.a_f.data()[idx].tanh();
                    let sg = sigmoid(trace.a_g.data()[idx]);
                    let g = gz.data()[idx];
                    ga_f.data_mut()[idx] = g * (S::one() - tf * tf) * sg;
                    ga_g.data_mut()[idx] = g * tf * sg * (S::one() - sg);
                }
            }
            Activation::Identity => {
                ga_f.data_mut().copy_from_slice(gz.data());
                ga_g.data_mut().copy_from_slice(gz.data());
            }
        }

        let mut gh = self.conv_filter.backward(&trace.h, &ga_f, &mut grads.conv_filter.kernel, &mut grads.conv_filter.bias)?;
        let gh_gate = self.conv_gate.backward(&trace.h, &ga_g, &mut grads.conv_gate.kernel, &mut grads.conv_gate.bias)?;
        gh.add_assign(&gh_gate)?;

        let gln = self.conv_in.backward(&trace.ln_out, &gh, &mut grads.conv_in.kernel, &mut grads.conv_in.bias)?;
        let affine_only = activation == Activation::Identity;
        let gx_norm = self.norm.backward(&trace.norm_cache, &gln, affine_only, &mut grads.norm.gain, &mut grads.norm.shift)?;

        // y = x + τ(x): the identity path passes gy straight through.
        let mut gx = gy.clone();
        gx.add_assign(&gx_norm)?;
        Ok(gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn gated_activation_zero_inputs_give_zero() {
        // tanh(0)·sigmoid(0) = 0·0.5 = 0.
        let z = 0.0f64.tanh() * sigmoid(0.0);
        assert_eq!(z, 0.0);
    }

    #[test]
    fn gated_activation_hand_value() {
        // tanh(0.5)·sigmoid(0) = 0.46211715726...·0.5 ≈ 0.2310586.
        let z = 0.5f64.tanh() * sigmoid(0.0);
        assert_relative_eq!(z, 0.2310586, epsilon = 1e-7);
    }

    #[test]
    fn gated_activation_stays_in_open_unit_interval() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        // Strictly inside (−1, 1) wherever tanh has not saturated to ±1.0
        // in double precision (|x| ≳ 19), and never outside [−1, 1].
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-15.0..15.0);
            let b: f64 = rng.random_range(-15.0..15.0);
            let z = a.tanh() * sigmoid(b);
            assert!(z > -1.0 && z < 1.0, "z = {z}");
        }
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-500.0..500.0);
            let b: f64 = rng.random_range(-500.0..500.0);
            let z = a.tanh() * sigmoid(b);
            assert!((-1.0..=1.0).contains(&z), "z = {z}");
        }
    }

    #[test]
    fn zero_parameter_block_is_the_identity() {
        // All-zero convolutions make τ ≡ 0, so y = x exactly.
        let block = ResidualBlock::<f64>::zeros(2, 1);
        let x = Tensor::from_vec(&[3, 4], (0..12).map(|v| v as f64 * 0.25 - 1.0).collect()).unwrap();
        let (y, skip, _) = block.forward(&x, Activation::Gated).unwrap();
        assert_eq!(y.data(), x.data());
        assert!(skip.data().iter().all(|v| *v == 0.0));
    }

    fn random_block(rng: &mut ChaCha12Rng, k: usize, d: usize) -> ResidualBlock<f64> {
        let mut block = ResidualBlock::zeros(k, d);
        for v in block.norm.gain.data_mut() {
            *v = rng.random_range(0.5..1.5);
        }
        for v in block.norm.shift.data_mut() {
            *v = rng.random_range(-0.3..0.3);
        }
        for conv in [&mut block.conv_in, &mut block.conv_filter, &mut block.conv_gate, &mut block.conv_out] {
            for v in conv.kernel.data_mut() {
                *v = rng.random_range(-0.5..0.5);
            }
            for v in conv.bias.data_mut() {
                *v = rng.random_range(-0.2..0.2);
            }
        }
        block
    }

    #[test]
    fn preserves_shape_and_respects_causality() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let block = random_block(&mut rng, 3, 2);
        let mut x = Tensor::zeros(&[9, 6]);
        for v in x.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let (y, skip, _) = block.forward(&x, Activation::Gated).unwrap();
        assert_eq!(y.shape(), &[9, 6]);
        assert_eq!(skip.shape(), &[9, 6]);

        // Changing timestep 6 must leave outputs at t < 6 untouched.
        let mut x2 = x.clone();
        x2.set2(6, 1, 5.0);
        let (y2, _, _) = block.forward(&x2, Activation::Gated).unwrap();
        for t in 0..6 {
            assert_eq!(y.row(t), y2.row(t), "row {t} changed");
        }
        // And it must influence some later timestep.
        assert_ne!(y.row(6), y2.row(6));
    }

    #[test]
    fn backward_matches_finite_differences() {
        for activation in [Activation::Gated, Activation::Identity] {
            let mut rng = ChaCha12Rng::seed_from_u64(13);
            let block = random_block(&mut rng, 2, 2);
            let mut x = Tensor::zeros(&[6, 4]);
            for v in x.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let mut wy = Tensor::zeros(&[6, 4]);
            let mut wskip = Tensor::zeros(&[6, 4]);
            for v in wy.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            for v in wskip.data_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            let objective = |block: &ResidualBlock<f64>, x: &Tensor<f64>| -> f64 {
                let (y, skip, _) = block.forward(x, activation).unwrap();
                let a: f64 = y.data().iter().zip(wy.data()).map(|(p, q)| p * q).sum();
                let b: f64 = skip.data().iter().zip(wskip.data()).map(|(p, q)| p * q).sum();
                a + b
            };

            let (_, _, trace) = block.forward(&x, activation).unwrap();
            let mut grads = block.zeros_like();
            let gx = block.backward(&trace, &wy, &wskip, activation, &mut grads).unwrap();

            let eps = 1e-6;
            for idx in 0..x.len() {
                let mut xp = x.clone();
                xp.data_mut()[idx] += eps;
                let mut xm = x.clone();
                xm.data_mut()[idx] -= eps;
                let fd = (objective(&block, &xp) - objective(&block, &xm)) / (2.0 * eps);
                assert_relative_eq!(gx.data()[idx], fd, epsilon = 1e-5, max_relative = 1e-4);
            }

            // Spot-check each parameter family.
            macro_rules! probe {
                (($($field:tt)+), $idx:expr) => {{
                    let mut bp = block.clone();
                    let mut bm = block.clone();
                    bp.$($field)+.data_mut()[$idx] += eps;
                    bm.$($field)+.data_mut()[$idx] -= eps;
                    let fd = (objective(&bp, &x) - objective(&bm, &x)) / (2.0 * eps);
                    let got = grads.$($field)+.data()[$idx];
                    assert_relative_eq!(got, fd, epsilon = 1e-5, max_relative = 1e-4);
                }};
            }
            probe!((norm.gain), 1);
            probe!((norm.shift), 2);
            probe!((conv_in.kernel), 3);
            probe!((conv_in.bias), 0);
            probe!((conv_filter.kernel), 5);
            probe!((conv_gate.kernel), 2);
            probe!((conv_out.kernel), 4);
            probe!((conv_out.bias), 1);
        }
    }
}
