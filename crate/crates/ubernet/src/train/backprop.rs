//! Exact reverse-mode gradients, hand-derived per layer from the forward
//! definitions and assembled by walking the forward trace backwards.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::net::{ForwardTrace, HeadOutput, HeadParams, Network};
use crate::panel::Window;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::loss::{penalty, window_loss, LossConfig};
use crate::train::Gradients;

/// Windows per accumulation chunk. Gradients are accumulated window-by-
/// window inside a chunk and chunk-by-chunk in index order, so sequential
/// and parallel evaluation produce bit-identical sums.
const GRAD_CHUNK: usize = 16;

/// Accumulates the gradient of this window's share of the batch data loss
/// (`weight` = 1/T) into `grads`, walking the trace backwards.
pub fn backward_window<S: Scalar>(
    net: &Network<S>,
    trace: &ForwardTrace<S>,
    target: S,
    weight: S,
    grads: &mut Gradients<S>,
) -> Result<()> {
    let wide = net.config.width();
    let rows = net.config.lookback + 1;

    // Head: gradient of the data loss with respect to the head input.
    let mut ghead_input = vec![S::zero(); wide];
    match (&net.head, &trace.output, &mut grads.arrays.head) {
        (
            HeadParams::Regression { weight: w, .. },
            HeadOutput::Scalar(pred),
            HeadParams::Regression { weight: gw, bias: gb },
        ) => {
            // d/dpred of (1/T)(target − pred)² = (2/T)(pred − target).
            let dpred = S::of(2.0) * (*pred - target) * weight;
            for c in 0..wide {
                gw.data_mut()[c] += dpred * trace.head_input[c];
                ghead_input[c] = dpred * w.at1(c);
            }
            gb.data_mut()[0] += dpred;
        }
        (
            HeadParams::Softmax { weight: w, .. },
            HeadOutput::Probs(probs),
            HeadParams::Softmax { weight: gw, bias: gb },
        ) => {
            // Cross-entropy through softmax: dlogit_b = (p_b − 1{b=bin})/T.
            let bin = net
                .config
                .head
                .bin_index(target.to64())
                .ok_or_else(|| Error::contract("softmax parameters with a regression head"))?;
            for (b, p) in probs.iter().enumerate() {
                let indicator = if b == bin { S::one() } else { S::zero() };
                let dlogit = (*p - indicator) * weight;
                gb.data_mut()[b] += dlogit;
                let w_row = w.row(b);
                let gw_row = gw.row_mut(b);
                for c in 0..wide {
                    gw_row[c] += dlogit * trace.head_input[c];
                    ghead_input[c] += dlogit * w_row[c];
                }
            }
        }
        _ => return Err(Error::contract("head output does not match head parameters")),
    }

    // Route the head-input gradient back onto the final projection output:
    // either the last timestep or, under pooling, each channel's argmax.
    let mut gfinal_out = Tensor::zeros(&[rows, wide]);
    match &trace.pool_argmax {
        Some(argmax) => {
            for c in 0..wide {
                let t = argmax[c];
                let v = gfinal_out.at2(t, c) + ghead_input[c];
                gfinal_out.set2(t, c, v);
            }
        }
        None => {
            gfinal_out.row_mut(rows - 1).copy_from_slice(&ghead_input);
        }
    }

    let gskip_act = net.final_conv.backward(
        &trace.skip_act,
        &gfinal_out,
        &mut grads.arrays.final_conv.kernel,
        &mut grads.arrays.final_conv.bias,
    )?;

    // skip_act = tanh(skip_sum) under gated activations, identity otherwise.
    let mut gskip_sum = gskip_act;
    if net.config.activation == crate::net::Activation::Gated {
        for (g, a) in gskip_sum.data_mut().iter_mut().zip(trace.skip_act.data()) {
            *g *= S::one() - *a * *a;
        }
    }

    // Blocks in reverse. The residual stream output of the last block feeds
    // nothing (only skips reach the head), so its output gradient is zero.
    let mut gy = Tensor::zeros(&[rows, wide]);
    for i in (0..net.blocks.len()).rev() {
        gy = net.blocks[i].backward(
            &trace.blocks[i],
            &gy,
            &gskip_sum,
            net.config.activation,
            &mut grads.arrays.blocks[i],
        )?;
    }

    net.embed.backward(&trace.window, &trace.embed_cache, &gy, &mut grads.arrays.embed)
}

/// Adds the penalty gradient: `l2·w` plus `l1·sign(w)` on penalized arrays.
fn add_penalty_gradient<S: Scalar>(net: &Network<S>, cfg: &LossConfig, grads: &mut Gradients<S>) {
    if cfg.l2 == 0.0 && cfg.l1 == 0.0 {
        return;
    }
    let l2 = S::of(cfg.l2);
    let l1 = S::of(cfg.l1);
    let sources = net.params();
    for (g, w) in grads.arrays.params_mut().into_iter().zip(sources) {
        if !w.penalized {
            continue;
        }
        for (gv, wv) in g.tensor.data_mut().iter_mut().zip(w.tensor.data()) {
            *gv += l2 * *wv;
            if cfg.l1 != 0.0 && *wv != S::zero() {
                *gv += l1 * wv.signum();
            }
        }
    }
}

fn chunk_gradient<S: Scalar, W: std::borrow::Borrow<Window<S>>>(
    net: &Network<S>,
    chunk: &[W],
    t_inv: S,
) -> Result<(S, Gradients<S>)> {
    let mut grads = Gradients::zeros(&net.config)?;
    let mut data = S::zero();
    for w in chunk {
        let w = w.borrow();
        let (out, trace) = net.forward(&w.input)?;
        data += window_loss(&net.config.head, &out, w.target)?;
        backward_window(net, &trace, w.target, t_inv, &mut grads)?;
    }
    Ok((data, grads))
}

fn finish<S: Scalar>(
    net: &Network<S>,
    cfg: &LossConfig,
    pieces: Vec<(S, Gradients<S>)>,
    total_windows: usize,
) -> Result<(S, Gradients<S>)> {
    let mut iter = pieces.into_iter();
    let (mut data, mut grads) = iter.next().expect("at least one chunk");
    for (d, g) in iter {
        data += d;
        grads.add_assign(&g)?;
    }
    add_penalty_gradient(net, cfg, &mut grads);
    grads.ensure_finite()?;
    let loss = data / S::of(total_windows as f64) + penalty(net, cfg);
    if !loss.is_finite() {
        return Err(Error::numeric("loss is not finite"));
    }
    Ok((loss, grads))
}

/// Loss and gradient over a window batch:
/// `E = (1/T) Σ_t data_t + penalty`. Sequential evaluation.
pub fn batch_gradient<S: Scalar, W: std::borrow::Borrow<Window<S>>>(
    net: &Network<S>,
    windows: &[W],
    cfg: &LossConfig,
) -> Result<(S, Gradients<S>)> {
    if windows.is_empty() {
        return Err(Error::contract("gradient over an empty window batch is undefined"));
    }
    cfg.validate()?;
    let t_inv = S::one() / S::of(windows.len() as f64);
    let pieces: Result<Vec<_>> = windows
        .chunks(GRAD_CHUNK)
        .map(|chunk| chunk_gradient(net, chunk, t_inv))
        .collect();
    finish(net, cfg, pieces?, windows.len())
}

/// Same result as [`batch_gradient`] — bit for bit — with chunks evaluated
/// across threads and merged in index order.
pub fn batch_gradient_parallel<S: Scalar, W: std::borrow::Borrow<Window<S>> + Sync>(
    net: &Network<S>,
    windows: &[W],
    cfg: &LossConfig,
) -> Result<(S, Gradients<S>)> {
    if windows.is_empty() {
        return Err(Error::contract("gradient over an empty window batch is undefined"));
    }
    cfg.validate()?;
    let t_inv = S::one() / S::of(windows.len() as f64);
    let pieces: Result<Vec<_>> = windows
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| chunk_gradient(net, chunk, t_inv))
        .collect();
    finish(net, cfg, pieces?, windows.len())
}
