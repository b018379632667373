//! Per-timestep layer normalization over channels.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Epsilon added to the variance inside the square root.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Learned per-channel gain and shift. In the standard mode each timestep's
/// channel vector is centered and scaled to unit variance before the affine
/// map. In affine-only mode (used by the identity-activation network
/// variant, which keeps every layer linear in its inputs) the
/// standardization step is skipped and the layer is exactly
/// `x · gain + shift` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<S> {
    pub gain: Tensor<S>,
    pub shift: Tensor<S>,
}

/// Values cached during the forward pass that the reverse pass needs.
#[derive(Debug, Clone)]
pub struct NormCache<S> {
    /// Standardized input (or the raw input in affine-only mode).
    pub xhat: Tensor<S>,
    /// Per-timestep `1 / sqrt(var + eps)` (all ones in affine-only mode).
    pub inv_std: Vec<S>,
}

impl<S: Scalar> LayerNorm<S> {
    /// Identity-initialized normalization: gain 1, shift 0.
    pub fn identity(channels: usize) -> LayerNorm<S> {
        let mut gain = Tensor::zeros(&[channels]);
        gain.fill(S::one());
        LayerNorm { gain, shift: Tensor::zeros(&[channels]) }
    }

    pub fn channels(&self) -> usize {
        self.gain.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<S>, affine_only: bool) -> Result<(Tensor<S>, NormCache<S>)> {
        let ch = self.channels();
        if x.rank() != 2 || x.shape()[1] != ch {
            return Err(Error::contract(format!(
                "layer norm expects input width {ch}, got shape {:?}",
                x.shape()
            )));
        }
        let t_len = x.shape()[0];
        let eps = S::of(LAYER_NORM_EPS);
        let mut xhat = x.clone();
        let mut inv_std = vec![S::one(); t_len];
        if !affine_only {
            let denom = S::of(ch as f64);
            for t in 0..t_len {
                let row = xhat.row_mut(t);
                let mean = row.iter().copied().sum::<S>() / denom;
                let mut var = S::zero();
                for v in row.iter() {
                    let d = *v - mean;
                    var += d * d;
                }
                var /= denom;
                let inv = S::one() / (var + eps).sqrt();
                inv_std[t] = inv;
                for v in row.iter_mut() {
                    *v = (*v - mean) * inv;
                }
            }
        }
        let mut out = Tensor::zeros(&[t_len, ch]);
        for t in 0..t_len {
            let h = xhat.row(t);
            let o = out.row_mut(t);
            for c in 0..ch {
                o[c] = h[c] * self.gain.at1(c) + self.shift.at1(c);
            }
        }
        Ok((out, NormCache { xhat, inv_std }))
    }

    /// Reverse pass. Accumulates parameter gradients into `ggain`/`gshift`
    /// and returns the gradient with respect to the layer input.
    pub fn backward(
        &self,
        cache: &NormCache<S>,
        gout: &Tensor<S>,
        affine_only: bool,
        ggain: &mut Tensor<S>,
        gshift: &mut Tensor<S>,
    ) -> Result<Tensor<S>> {
        let ch = self.channels();
        let t_len = cache.xhat.shape()[0];
        if gout.shape() != [t_len, ch] {
            return Err(Error::size(format!(
                "layer norm backward: gradient shape {:?} does not match ({t_len}, {ch})",
                gout.shape()
            )));
        }
        let mut gx = Tensor::zeros(&[t_len, ch]);
        let denom = S::of(ch as f64);
        for t in 0..t_len {
            let g_row = gout.row(t);
            let h_row = cache.xhat.row(t);
            for c in 0..ch {
                ggain.data_mut()[c] += g_row[c] * h_row[c];
                gshift.data_mut()[c] += g_row[c];
            }
            // Gradient through the affine map first: d/dxhat = gout * gain.
            let gh: Vec<S> = (0..ch).map(|c| g_row[c] * self.gain.at1(c)).collect();
            let gx_row = gx.row_mut(t);
            if affine_only {
                gx_row.copy_from_slice(&gh);
                continue;
            }
            let mean_gh = gh.iter().copied().sum::<S>() / denom;
            let mut mean_gh_xhat = S::zero();
            for c in 0..ch {
                mean_gh_xhat += gh[c] * h_row[c];
            }
            mean_gh_xhat /= denom;
            let inv = cache.inv_std[t];
            for c in 0..ch {
                gx_row[c] = inv * (gh[c] - mean_gh - h_row[c] * mean_gh_xhat);
            }
        }
        Ok(gx)
    }
}
