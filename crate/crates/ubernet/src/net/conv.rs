//! Causal dilated 1-D convolution.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Convolution parameters: kernel `(kernel_size, in_channels, out_channels)`,
/// bias `(out_channels)`, and a dilation factor.
///
/// The convolution is causal with implicit left zero padding:
/// `out(t, o) = bias(o) + Σ_i Σ_c kernel(i, c, o) · x(t − d·i, c)`,
/// where taps reaching before the first timestep read zero. Output length
/// always equals input length. A kernel size of 1 makes this a pointwise
/// (1×1) channel mix.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1D<S> {
    pub kernel: Tensor<S>,
    pub bias: Tensor<S>,
    pub dilation: usize,
}

impl<S: Scalar> Conv1D<S> {
    pub fn zeros(kernel_size: usize, in_channels: usize, out_channels: usize, dilation: usize) -> Conv1D<S> {
        assert!(kernel_size >= 1 && dilation >= 1);
        Conv1D {
            kernel: Tensor::zeros(&[kernel_size, in_channels, out_channels]),
            bias: Tensor::zeros(&[out_channels]),
            dilation,
        }
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[2]
    }

    /// Forward pass over `x` of shape `(T, in_channels)`.
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        if x.rank() != 2 || x.shape()[1] != self.in_channels() {
            return Err(Error::contract(format!(
                "conv expects input width {}, got shape {:?}",
                self.in_channels(),
                x.shape()
            )));
        }
        let t_len = x.shape()[0];
        let (ks, cin, cout) = (self.kernel_size(), self.in_channels(), self.out_channels());
        let d = self.dilation;
        let mut out = Tensor::zeros(&[t_len, cout]);
        for t in 0..t_len {
            let out_row = out.row_mut(t);
            out_row.copy_from_slice(self.bias.data());
            for i in 0..ks {
                let Some(src) = t.checked_sub(d * i) else { break };
                let x_row = x.row(src);
                for c in 0..cin {
                    let xv = x_row[c];
                    if xv == S::zero() {
                        continue;
                    }
                    let kbase = (i * cin + c) * cout;
                    let krow = &self.kernel.data()[kbase..kbase + cout];
                    for (o, kv) in krow.iter().enumerate() {
                        out_row[o] += *kv * xv;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Reverse pass: given upstream gradient `gout` (same shape as the
    /// forward output) and the forward input `x`, produces the input
    /// gradient and accumulates parameter gradients into `gkernel`/`gbias`.
    pub fn backward(
        &self,
        x: &Tensor<S>,
        gout: &Tensor<S>,
        gkernel: &mut Tensor<S>,
        gbias: &mut Tensor<S>,
    ) -> Result<Tensor<S>> {
        let t_len = x.shape()[0];
        if gout.shape() != [t_len, self.out_channels()] {
            return Err(Error::size(format!(
                "conv backward: upstream gradient shape {:?} does not match output ({}, {})",
                gout.shape(),
                t_len,
                self.out_channels()
            )));
        }
        let (ks, cin, cout) = (self.kernel_size(), self.in_channels(), self.out_channels());
        let d = self.dilation;

        for t in 0..t_len {
            let g_row = gout.row(t);
            for (o, gv) in g_row.iter().enumerate() {
                gbias.data_mut()[o] += *gv;
            }
            for i in 0..ks {
                let Some(src) = t.checked_sub(d * i) else { break };
                let x_row = x.row(src);
                for c in 0..cin {
                    let xv = x_row[c];
                    if xv == S::zero() {
                        continue;
                    }
                    let kbase = (i * cin + c) * cout;
                    let gk = &mut gkernel.data_mut()[kbase..kbase + cout];
                    for (o, gv) in g_row.iter().enumerate() {
                        gk[o] += *gv * xv;
                    }
                }
            }
        }

        let mut gx = Tensor::zeros(&[t_len, cin]);
        for t in 0..t_len {
            let g_row = gout.row(t);
            for i in 0..ks {
                let Some(src) = t.checked_sub(d * i) else { break };
                let gx_row = gx.row_mut(src);
                for c in 0..cin {
                    let kbase = (i * cin + c) * cout;
                    let krow = &self.kernel.data()[kbase..kbase + cout];
                    let mut acc = S::zero();
                    for (o, kv) in krow.iter().enumerate() {
                        acc += *kv * g_row[o];
                    }
                    gx_row[c] += acc;
                }
            }
        }
        Ok(gx)
    }
}
