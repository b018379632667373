//! Temporal convolutional network for one-step demand forecasting.
//!
//! A raw input window of `s+1` timesteps is embedded to the network width
//! `2k`, passed through a stack of residual blocks with dilated causal
//! convolutions and gated activations, and reduced by a skip-sum/tanh/1×1
//! projection. The head reads the last timestep (or a max-pool over time)
//! and emits either a scalar regression value or a vector of bin
//! probabilities.

pub mod block;
pub mod conv;
pub mod embed;
pub mod norm;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
pub use block::{BlockGrads, BlockTrace, ResidualBlock};
pub use conv::Conv1D;
pub use embed::{EmbedCache, Embedding, FeatureEmbed};
pub use norm::{LayerNorm, NormCache};

/// How one raw input column enters the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Continuous,
    Categorical { cardinality: usize },
}

/// One raw input column: its name and kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub name: String,
    pub kind: InputKind,
}

impl InputSpec {
    pub fn continuous(name: &str) -> InputSpec {
        InputSpec { name: name.to_string(), kind: InputKind::Continuous }
    }

    pub fn categorical(name: &str, cardinality: usize) -> InputSpec {
        InputSpec { name: name.to_string(), kind: InputKind::Categorical { cardinality } }
    }
}

/// Output head type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Scalar regression output (the default).
    Regression,
    /// Softmax over `edges.len() + 1` bins; `edges` must be strictly
    /// increasing. Bin `i` covers `[edges[i-1], edges[i])` with open-ended
    /// first and last bins.
    SoftmaxBins { edges: Vec<f64> },
}

impl Head {
    /// Number of output values this head produces.
    pub fn output_dim(&self) -> usize {
        match self {
            Head::Regression => 1,
            Head::SoftmaxBins { edges } => edges.len() + 1,
        }
    }

    /// Bin index for a target value (softmax head training and reporting).
    pub fn bin_index(&self, value: f64) -> Option<usize> {
        match self {
            Head::Regression => None,
            Head::SoftmaxBins { edges } => Some(edges.partition_point(|e| *e <= value)),
        }
    }
}

/// Nonlinearity selection. `Identity` replaces the gate with `a_f + a_g`,
/// the skip tanh with a pass-through, and layer normalization with its
/// affine map, making the whole network linear in its parameters along any
/// single coordinate — useful for exact gradient verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Activation {
    #[default]
    Gated,
    Identity,
}


fn default_head() -> Head {
    Head::Regression
}

/// Complete structural description of a network. Serialized into
/// checkpoints, so a saved model can be rebuilt without external context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Window length minus one: each input window has `lookback + 1` rows.
    pub lookback: usize,
    /// Bottleneck width `k`; the network itself runs at width `2k`.
    pub channels: usize,
    /// Per-feature embedding width `w`.
    pub embed_width: usize,
    /// One residual block per entry, in order, each with this dilation.
    pub dilations: Vec<usize>,
    /// Raw input columns in window order.
    pub inputs: Vec<InputSpec>,
    #[serde(default = "default_head")]
    pub head: Head,
    #[serde(default)]
    pub activation: Activation,
    /// Max-pool over time before the head instead of reading the last
    /// timestep. Off by default.
    #[serde(default)]
    pub max_pool_head: bool,
}

impl NetworkConfig {
    /// Full-scale defaults: k = 100 (network width 200), embedding width 8,
    /// dilations `[1, 2]`.
    pub fn standard(inputs: Vec<InputSpec>, lookback: usize) -> NetworkConfig {
        NetworkConfig {
            lookback,
            channels: 100,
            embed_width: 8,
            dilations: vec![1, 2],
            inputs,
            head: Head::Regression,
            activation: Activation::Gated,
            max_pool_head: false,
        }
    }

    /// Desk-scale defaults for fast experiments: k = 8.
    pub fn desk(inputs: Vec<InputSpec>, lookback: usize) -> NetworkConfig {
        NetworkConfig { channels: 8, ..NetworkConfig::standard(inputs, lookback) }
    }

    /// Network width (`2k`): embedding output, block input/output, and
    /// final projection width all equal this by construction.
    pub fn width(&self) -> usize {
        2 * self.channels
    }

    /// Number of timesteps that can influence the last-timestep output:
    /// each block's pair of kernel-size-3 dilated convolutions reaches
    /// `2·d` steps back, so `R = 1 + Σ 2·d`.
    pub fn receptive_field(&self) -> usize {
        1 + self.dilations.iter().map(|d| 2 * d).sum::<usize>()
    }

    /// Checks hard structural invariants, returning human-readable warnings
    /// for legal-but-suspicious settings (window/receptive-field mismatch).
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.channels == 0 {
            return Err(Error::contract("channels must be at least 1"));
        }
        if self.embed_width == 0 {
            return Err(Error::contract("embed_width must be at least 1"));
        }
        if self.dilations.is_empty() {
            return Err(Error::contract("at least one residual block (dilation) is required"));
        }
        if let Some(d) = self.dilations.iter().find(|d| **d == 0) {
            return Err(Error::contract(format!("dilation must be at least 1, got {d}")));
        }
        if self.inputs.is_empty() {
            return Err(Error::contract("at least one input column is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.inputs {
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::contract(format!("duplicate input column '{}'", spec.name)));
            }
            if let InputKind::Categorical { cardinality } = spec.kind {
                if cardinality == 0 {
                    return Err(Error::contract(format!(
                        "categorical input '{}' must have cardinality at least 1",
                        spec.name
                    )));
                }
            }
        }
        if let Head::SoftmaxBins { edges } = &self.head {
            if edges.is_empty() {
                return Err(Error::contract("softmax head needs at least one bin edge"));
            }
            if !edges.windows(2).all(|p| p[0] < p[1]) || edges.iter().any(|e| !e.is_finite()) {
                return Err(Error::contract("softmax bin edges must be finite and strictly increasing"));
            }
        }
        let mut warnings = Vec::new();
        let r = self.receptive_field();
        let rows = self.lookback + 1;
        if r > rows {
            warnings.push(format!(
                "receptive field {r} exceeds the window length {rows}; the deepest taps only ever read zero padding"
            ));
        }
        if r < rows && !self.max_pool_head {
            warnings.push(format!(
                "window length {rows} exceeds receptive field {r}; the oldest {} timestep(s) cannot influence the output",
                rows - r
            ));
        }
        Ok(warnings)
    }
}

/// Head parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadParams<S> {
    /// `weight` has shape `(2k)`, `bias` shape `(1)`.
    Regression { weight: Tensor<S>, bias: Tensor<S> },
    /// `weight` has shape `(bins, 2k)`, `bias` shape `(bins)`.
    Softmax { weight: Tensor<S>, bias: Tensor<S> },
}

/// Network output: a scalar forecast or bin probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadOutput<S> {
    Scalar(S),
    Probs(Vec<S>),
}

impl<S: Scalar> HeadOutput<S> {
    /// The scalar value, for regression networks.
    pub fn scalar(&self) -> Result<S> {
        match self {
            HeadOutput::Scalar(v) => Ok(*v),
            HeadOutput::Probs(_) => Err(Error::contract("expected a scalar output, got bin probabilities")),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|l| (*l - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.iter().map(|e| *e / total).collect()
}

/// Everything the reverse pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace<S> {
    pub window: Tensor<S>,
    pub embed_cache: EmbedCache<S>,
    pub embedded: Tensor<S>,
    pub blocks: Vec<BlockTrace<S>>,
    pub skip_sum: Tensor<S>,
    pub skip_act: Tensor<S>,
    pub final_out: Tensor<S>,
    pub head_input: Vec<S>,
    /// Per-channel timestep chosen by the max-pool head (first maximum).
    pub pool_argmax: Option<Vec<usize>>,
    pub logits: Option<Vec<S>>,
    pub output: HeadOutput<S>,
}

/// Reference to one named parameter array.
pub struct ParamRef<'a, S> {
    pub name: String,
    /// Whether the array participates in the weight penalty (kernels and
    /// embedding/head weights do; biases and normalization parameters
    /// do not).
    pub penalized: bool,
    pub tensor: &'a Tensor<S>,
}

/// Mutable variant of [`ParamRef`].
pub struct ParamRefMut<'a, S> {
    pub name: String,
    pub penalized: bool,
    pub tensor: &'a mut Tensor<S>,
}

/// The full network: configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<S> {
    pub config: NetworkConfig,
    pub embed: Embedding<S>,
    pub blocks: Vec<ResidualBlock<S>>,
    pub final_conv: Conv1D<S>,
    pub head: HeadParams<S>,
}

fn xavier_fill<S: Scalar>(tensor: &mut Tensor<S>, fan_in: usize, fan_out: usize, rng: &mut ChaCha12Rng) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new(-bound, bound).expect("valid uniform bounds");
    for v in tensor.data_mut() {
        *v = S::of(dist.sample(rng));
    }
}

impl<S: Scalar> Network<S> {
    /// Structure with every parameter array zeroed (layer-norm gains
    /// included). Used as the gradient container.
    pub fn zeros(config: &NetworkConfig) -> Result<Network<S>> {
        config.validate()?;
        let wide = config.width();
        let embed = Embedding::zeros(&config.inputs, config.embed_width, wide);
        let blocks = config
            .dilations
            .iter()
            .map(|d| {
                let mut b = ResidualBlock::zeros(config.channels, *d);
                b.norm.gain.fill(S::zero());
                b
            })
            .collect();
        let final_conv = Conv1D::zeros(1, wide, wide, 1);
        let head = match &config.head {
            Head::Regression => HeadParams::Regression {
                weight: Tensor::zeros(&[wide]),
                bias: Tensor::zeros(&[1]),
            },
            Head::SoftmaxBins { edges } => HeadParams::Softmax {
                weight: Tensor::zeros(&[edges.len() + 1, wide]),
                bias: Tensor::zeros(&[edges.len() + 1]),
            },
        };
        Ok(Network { config: config.clone(), embed, blocks, final_conv, head })
    }

    /// Seeded initialization: weight arrays draw from the uniform
    /// distribution `±sqrt(6 / (fan_in + fan_out))`, biases start at zero,
    /// and layer normalization starts as the identity (gain 1, shift 0).
    /// The same seed always produces bit-identical parameters.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Network<S>> {
        let mut net = Network::zeros(config)?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let w = config.embed_width;
        for (_, fe) in &mut net.embed.features {
            match fe {
                FeatureEmbed::Continuous { weights } => xavier_fill(weights, 1, w, &mut rng),
                FeatureEmbed::Categorical { table } => {
                    let card = table.shape()[0];
                    xavier_fill(table, card, w, &mut rng);
                }
            }
        }
        let mix_rows = net.embed.mix.shape()[0];
        let wide = config.width();
        xavier_fill(&mut net.embed.mix, mix_rows, wide, &mut rng);
        for block in &mut net.blocks {
            block.norm.gain.fill(S::one());
            for conv in [&mut block.conv_in, &mut block.conv_filter, &mut block.conv_gate, &mut block.conv_out] {
                let ks = conv.kernel_size();
                let (cin, cout) = (conv.in_channels(), conv.out_channels());
                xavier_fill(&mut conv.kernel, ks * cin, ks * cout, &mut rng);
            }
        }
        xavier_fill(&mut net.final_conv.kernel, wide, wide, &mut rng);
        match &mut net.head {
            HeadParams::Regression { weight, .. } => xavier_fill(weight, wide, 1, &mut rng),
            HeadParams::Softmax { weight, .. } => {
                let bins = weight.shape()[0];
                xavier_fill(weight, wide, bins, &mut rng);
            }
        }
        Ok(net)
    }

    /// All parameter arrays in a fixed, stable order.
    pub fn params(&self) -> Vec<ParamRef<'_, S>> {
        let mut out = Vec::new();
        for (name, fe) in &self.embed.features {
            match fe {
                FeatureEmbed::Continuous { weights } => {
                    out.push(ParamRef { name: format!("embed.feature.{name}.weights"), penalized: true, tensor: weights });
                }
                FeatureEmbed::Categorical { table } => {
                    out.push(ParamRef { name: format!("embed.feature.{name}.table"), penalized: true, tensor: table });
                }
            }
        }
        out.push(ParamRef { name: "embed.mix".into(), penalized: true, tensor: &self.embed.mix });
        for (i, block) in self.blocks.iter().enumerate() {
            out.push(ParamRef { name: format!("block{i}.norm.gain"), penalized: false, tensor: &block.norm.gain });
            out.push(ParamRef { name: format!("block{i}.norm.shift"), penalized: false, tensor: &block.norm.shift });
            for (label, conv) in [
                ("conv_in", &block.conv_in),
                ("conv_filter", &block.conv_filter),
                ("conv_gate", &block.conv_gate),
                ("conv_out", &block.conv_out),
            ] {
                out.push(ParamRef { name: format!("block{i}.{label}.kernel"), penalized: true, tensor: &conv.kernel });
                out.push(ParamRef { name: format!("block{i}.{label}.bias"), penalized: false, tensor: &conv.bias });
            }
        }
        out.push(ParamRef { name: "final.kernel".into(), penalized: true, tensor: &self.final_conv.kernel });
        out.push(ParamRef { name: "final.bias".into(), penalized: false, tensor: &self.final_conv.bias });
        match &self.head {
            HeadParams::Regression { weight, bias } | HeadParams::Softmax { weight, bias } => {
                out.push(ParamRef { name: "head.weight".into(), penalized: true, tensor: weight });
                out.push(ParamRef { name: "head.bias".into(), penalized: false, tensor: bias });
            }
        }
        out
    }

    /// Mutable access to all parameter arrays, in the same order as
    /// [`Network::params`].
    pub fn params_mut(&mut self) -> Vec<ParamRefMut<'_, S>> {
        let mut out = Vec::new();
        for (name, fe) in &mut self.embed.features {
            match fe {
                FeatureEmbed::Continuous { weights } => {
                    out.push(ParamRefMut { name: format!("embed.feature.{name}.weights"), penalized: true, tensor: weights });
                }
                FeatureEmbed::Categorical { table } => {
                    out.push(ParamRefMut { name: format!("embed.feature.{name}.table"), penalized: true, tensor: table });
                }
            }
        }
        out.push(ParamRefMut { name: "embed.mix".into(), penalized: true, tensor: &mut self.embed.mix });
        for (i, block) in self.blocks.iter_mut().enumerate() {
            out.push(ParamRefMut { name: format!("block{i}.norm.gain"), penalized: false, tensor: &mut block.norm.gain });
            out.push(ParamRefMut { name: format!("block{i}.norm.shift"), penalized: false, tensor: &mut block.norm.shift });
            for (label, conv) in [
                ("conv_in", &mut block.conv_in),
                ("conv_filter", &mut block.conv_filter),
                ("conv_gate", &mut block.conv_gate),
                ("conv_out", &mut block.conv_out),
            ] {
                out.push(ParamRefMut { name: format!("block{i}.{label}.kernel"), penalized: true, tensor: &mut conv.kernel });
                out.push(ParamRefMut { name: format!("block{i}.{label}.bias"), penalized: false, tensor: &mut conv.bias });
            }
        }
        out.push(ParamRefMut { name: "final.kernel".into(), penalized: true, tensor: &mut self.final_conv.kernel });
        out.push(ParamRefMut { name: "final.bias".into(), penalized: false, tensor: &mut self.final_conv.bias });
        match &mut self.head {
            HeadParams::Regression { weight, bias } | HeadParams::Softmax { weight, bias } => {
                out.push(ParamRefMut { name: "head.weight".into(), penalized: true, tensor: weight });
                out.push(ParamRefMut { name: "head.bias".into(), penalized: false, tensor: bias });
            }
        }
        out
    }

    /// Total number of scalar parameters (matches the sum of array sizes).
    pub fn param_count(config: &NetworkConfig) -> usize {
        let w = config.embed_width;
        let wide = config.width();
        let k = config.channels;
        let mut count = 0usize;
        for spec in &config.inputs {
            count += match spec.kind {
                InputKind::Continuous => w,
                InputKind::Categorical { cardinality } => cardinality * w,
            };
        }
        count += config.inputs.len() * w * wide; // mix
        for _ in &config.dilations {
            count += 2 * wide; // norm gain + shift
            count += wide * k + k; // conv_in
            count += 2 * (block::GATE_KERNEL_SIZE * k * k + k); // filter + gate
            count += k * wide + wide; // conv_out
        }
        count += wide * wide + wide; // final projection
        count += match &config.head {
            Head::Regression => wide + 1,
            Head::SoftmaxBins { edges } => (edges.len() + 1) * (wide + 1),
        };
        count
    }

    /// Forward pass over one window of shape `(lookback + 1, F)`.
    pub fn forward(&self, window: &Tensor<S>) -> Result<(HeadOutput<S>, ForwardTrace<S>)> {
        let rows = self.config.lookback + 1;
        if window.rank() != 2 || window.shape()[0] != rows {
            return Err(Error::contract(format!(
                "window must have {rows} rows ({} lookback + current), got shape {:?}",
                self.config.lookback,
                window.shape()
            )));
        }
        let (embedded, embed_cache) = self.embed.forward(window)?;
        embedded.ensure_finite("embedding output")?;

        let wide = self.config.width();
        let mut x = embedded.clone();
        let mut skip_sum = Tensor::zeros(&[rows, wide]);
        let mut block_traces = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter().enumerate() {
            let (y, skip, trace) = block.forward(&x, self.config.activation)?;
            y.ensure_finite(&format!("block {i} output"))?;
            skip_sum.add_assign(&skip)?;
            block_traces.push(trace);
            x = y;
        }

        let mut skip_act = skip_sum.clone();
        if self.config.activation == Activation::Gated {
            for v in skip_act.data_mut() {
                *v = v.tanh();
            }
        }
        let final_out = self.final_conv.forward(&skip_act)?;
        final_out.ensure_finite("final projection")?;

        let (head_input, pool_argmax) = if self.config.max_pool_head {
            let mut best = final_out.row(0).to_vec();
            let mut arg = vec![0usize; wide];
            for t in 1..rows {
                let row = final_out.row(t);
                for c in 0..wide {
                    if row[c] > best[c] {
                        best[c] = row[c];
                        arg[c] = t;
                    }
                }
            }
            (best, Some(arg))
        } else {
            (final_out.row(rows - 1).to_vec(), None)
        };

        let (output, logits) = match &self.head {
            HeadParams::Regression { weight, bias } => {
                let mut acc = bias.at1(0);
                for c in 0..wide {
                    acc += weight.at1(c) * head_input[c];
                }
                if !acc.is_finite() {
                    return Err(Error::numeric("prediction is not finite"));
                }
                (HeadOutput::Scalar(acc), None)
            }
            HeadParams::Softmax { weight, bias } => {
                let bins = bias.len();
                let mut logits = vec![S::zero(); bins];
                for b in 0..bins {
                    let mut acc = bias.at1(b);
                    let w_row = weight.row(b);
                    for c in 0..wide {
                        acc += w_row[c] * head_input[c];
                    }
                    logits[b] = acc;
                }
                if logits.iter().any(|l| !l.is_finite()) {
                    return Err(Error::numeric("prediction logits are not finite"));
                }
                let probs = softmax(&logits);
                (HeadOutput::Probs(probs), Some(logits))
            }
        };

        let trace = ForwardTrace {
            window: window.clone(),
            embed_cache,
            embedded,
            blocks: block_traces,
            skip_sum,
            skip_act,
            final_out,
            head_input,
            pool_argmax,
            logits,
            output: output.clone(),
        };
        Ok((output, trace))
    }

    /// Forward pass without keeping the trace.
    pub fn predict(&self, window: &Tensor<S>) -> Result<HeadOutput<S>> {
        Ok(self.forward(window)?.0)
    }
}
