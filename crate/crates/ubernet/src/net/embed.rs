//! Input embedding: per-feature lookup tables / projection vectors plus a
//! bias-free linear mix up to the network channel width.

use crate::error::{Error, Result};
use crate::net::{InputKind, InputSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Learned parameters for one input feature.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureEmbed<S> {
    /// Continuous input: the value scales a learned width-`w` vector
    /// (no bias term).
    Continuous { weights: Tensor<S> },
    /// Categorical input: the integer code selects a row of a
    /// `(cardinality, w)` lookup table.
    Categorical { table: Tensor<S> },
}

/// Embedding stage: each of the `F` raw input columns maps to a width-`w`
/// vector; the concatenated `(F·w)` row is mixed by a bias-free linear map
/// to the network width.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<S> {
    pub features: Vec<(String, FeatureEmbed<S>)>,
    /// Bias-free mixing matrix, shape `(F·w, out_width)`.
    pub mix: Tensor<S>,
    pub width: usize,
}

/// Forward-pass byproduct needed by the reverse pass.
#[derive(Debug, Clone)]
pub struct EmbedCache<S> {
    /// Concatenated per-feature vectors, shape `(T, F·w)`.
    pub concat: Tensor<S>,
}

impl<S: Scalar> Embedding<S> {
    pub fn zeros(inputs: &[InputSpec], width: usize, out_width: usize) -> Embedding<S> {
        assert!(width >= 1 && out_width >= 1 && !inputs.is_empty());
        let features = inputs
            .iter()
            .map(|spec| {
                let embed = match spec.kind {
                    InputKind::Continuous => FeatureEmbed::Continuous { weights: Tensor::zeros(&[width]) },
                    InputKind::Categorical { cardinality } => {
                        FeatureEmbed::Categorical { table: Tensor::zeros(&[cardinality, width]) }
                    }
                };
                (spec.name.clone(), embed)
            })
            .collect();
        Embedding { features, mix: Tensor::zeros(&[inputs.len() * width, out_width]), width }
    }

    pub fn in_width(&self) -> usize {
        self.features.len()
    }

    pub fn out_width(&self) -> usize {
        self.mix.shape()[1]
    }

    fn categorical_index(&self, name: &str, value: S, cardinality: usize) -> Result<usize> {
        let v = value.to64();
        let rounded = v.round();
        if !v.is_finite() || (v - rounded).abs() > 1e-9 {
            return Err(Error::input(format!(
                "categorical feature '{name}' requires an integer code, got {v}"
            )));
        }
        if rounded < 0.0 || rounded >= cardinality as f64 {
            return Err(Error::input(format!(
                "categorical feature '{name}' code {rounded} out of range 0..{cardinality}"
            )));
        }
        Ok(rounded as usize)
    }

    /// Embeds a raw window of shape `(T, F)` into `(T, out_width)`.
    pub fn forward(&self, window: &Tensor<S>) -> Result<(Tensor<S>, EmbedCache<S>)> {
        let f_raw = self.in_width();
        if window.rank() != 2 || window.shape()[1] != f_raw {
            return Err(Error::contract(format!(
                "embedding expects {f_raw} input columns, got shape {:?}",
                window.shape()
            )));
        }
        let t_len = window.shape()[0];
        let w = self.width;
        let mut concat = Tensor::zeros(&[t_len, f_raw * w]);
        for t in 0..t_len {
            let row = window.row(t);
            let out_row = concat.row_mut(t);
            for (fi, (name, embed)) in self.features.iter().enumerate() {
                let seg = &mut out_row[fi * w..(fi + 1) * w];
                match embed {
                    FeatureEmbed::Continuous { weights } => {
                        let v = row[fi];
                        for (u, wv) in weights.data().iter().enumerate() {
                            seg[u] = v * *wv;
                        }
                    }
                    FeatureEmbed::Categorical { table } => {
                        let card = table.shape()[0];
                        let idx = self.categorical_index(name, row[fi], card)?;
                        seg.copy_from_slice(table.row(idx));
                    }
                }
            }
        }
        // Bias-free mix: out = concat · mix.
        let cw = f_raw * w;
        let ow = self.out_width();
        let mut out = Tensor::zeros(&[t_len, ow]);
        for t in 0..t_len {
            let c_row = concat.row(t);
            let o_row = out.row_mut(t);
            for (j, cv) in c_row.iter().enumerate() {
                if *cv == S::zero() {
                    continue;
                }
                let m_row = &self.mix.data()[j * ow..(j + 1) * ow];
                for o in 0..ow {
                    o_row[o] += *cv * m_row[o];
                }
            }
        }
        let _ = cw;
        Ok((out, EmbedCache { concat }))
    }

    /// Reverse pass: accumulates gradients for the mix matrix and each
    /// feature's parameters into `grads` (a zero-initialized clone of the
    /// embedding structure).
    pub fn backward(
        &self,
        window: &Tensor<S>,
        cache: &EmbedCache<S>,
        gout: &Tensor<S>,
        grads: &mut Embedding<S>,
    ) -> Result<()> {
        let t_len = window.shape()[0];
        let ow = self.out_width();
        if gout.shape() != [t_len, ow] {
            return Err(Error::size(format!(
                "embedding backward: gradient shape {:?} does not match ({t_len}, {ow})",
                gout.shape()
            )));
        }
        let w = self.width;
        let cw = cache.concat.shape()[1];
        let mut gconcat = Tensor::zeros(&[t_len, cw]);
        for t in 0..t_len {
            let c_row = cache.concat.row(t);
            let g_row = gout.row(t);
            let gc_row = gconcat.row_mut(t);
            for j in 0..cw {
                let m_row = &self.mix.data()[j * ow..(j + 1) * ow];
                let gm_row = &mut grads.mix.data_mut()[j * ow..(j + 1) * ow];
                let cv = c_row[j];
                let mut acc = S::zero();
                for o in 0..ow {
                    acc += m_row[o] * g_row[o];
                    gm_row[o] += cv * g_row[o];
                }
                gc_row[j] = acc;
            }
        }
        for t in 0..t_len {
            let row = window.row(t);
            let gc_row = gconcat.row(t);
            for (fi, (name, embed)) in self.features.iter().enumerate() {
                let seg = &gc_row[fi * w..(fi + 1) * w];
                match (embed, &mut grads.features[fi].1) {
                    (FeatureEmbed::Continuous { weights: _ }, FeatureEmbed::Continuous { weights: gw }) => {
                        let v = row[fi];
                        for (u, gv) in seg.iter().enumerate() {
                            gw.data_mut()[u] += v * *gv;
                        }
                    }
                    (FeatureEmbed::Categorical { table }, FeatureEmbed::Categorical { table: gt }) => {
                        let card = table.shape()[0];
                        let idx = self.categorical_index(name, row[fi], card)?;
                        let g_seg = &mut gt.row_mut(idx)[..];
                        for (u, gv) in seg.iter().enumerate() {
                            g_seg[u] += *gv;
                        }
                    }
                    _ => unreachable!("gradient structure mirrors the embedding"),
                }
            }
        }
        Ok(())
    }
}
