//! Finite-difference verification of the analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::net::Network;
use crate::panel::Window;
use crate::train::backprop::batch_gradient;
use crate::train::loss::{batch_loss, LossConfig};
use crate::train::Gradients;

/// Settings for the check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// How many coordinates to probe when not running the full check.
    /// Values below 200 are raised to 200: a smaller sample says too
    /// little about a network-sized parameter vector.
    pub subsample: usize,
    /// Check every coordinate instead of a sample.
    pub full: bool,
    /// Seed for the coordinate sample.
    pub seed: u64,
    /// Central-difference step.
    pub step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { tolerance: 1e-4, subsample: 200, full: false, seed: 0, step: 1e-5 }
    }
}

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_rel_err: f64,
    /// Parameter array holding the worst coordinate, and its flat index.
    pub worst_param: String,
    pub worst_index: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn summary(&self) -> String {
        format!(
            "{}: checked {} coordinate(s), max relative error {:.3e} at {}[{}] (tolerance {:.1e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.coords_checked,
            self.max_rel_err,
            self.worst_param,
            self.worst_index,
            self.tolerance
        )
    }
}

/// Compares supplied gradients against central differences of the batch
/// loss: for each probed coordinate,
/// `fd = (E(θ+h) − E(θ−h)) / 2h`, `rel = |g − fd| / max(|g|, |fd|, 1e-12)`.
pub fn verify_gradients(
    net: &Network<f64>,
    windows: &[Window<f64>],
    loss_cfg: &LossConfig,
    cfg: &GradCheckConfig,
    grads: &Gradients<f64>,
) -> Result<GradCheckReport> {
    if windows.is_empty() {
        return Err(Error::contract("gradient check needs at least one window"));
    }
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::contract("gradient check step must be positive"));
    }

    // Layout: flat coordinate space over all parameter arrays in order.
    let layout: Vec<(String, usize)> = net.params().iter().map(|p| (p.name.clone(), p.tensor.len())).collect();
    let total: usize = layout.iter().map(|(_, l)| l).sum();
    let analytic: Vec<f64> = grads
        .arrays
        .params()
        .iter()
        .flat_map(|p| p.tensor.data().iter().copied())
        .collect();
    if analytic.len() != total {
        return Err(Error::contract("gradient structure does not match the network"));
    }

    let coords: Vec<usize> = if cfg.full || cfg.subsample.max(200) >= total {
        (0..total).collect()
    } else {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let mut picked = rand::seq::index::sample(&mut rng, total, cfg.subsample.max(200)).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut probe = net.clone();
    let mut max_rel = 0.0f64;
    let mut worst = (layout[0].0.clone(), 0usize);
    for &coord in &coords {
        // Locate the owning array.
        let mut array_idx = 0usize;
        let mut offset = coord;
        while offset >= layout[array_idx].1 {
            offset -= layout[array_idx].1;
            array_idx += 1;
        }
        let theta = analytic_source(&probe, array_idx, offset);
        let h = cfg.step;

        set_param(&mut probe, array_idx, offset, theta + h);
        let up = batch_loss(&probe, windows, loss_cfg)?;
        set_param(&mut probe, array_idx, offset, theta - h);
        let down = batch_loss(&probe, windows, loss_cfg)?;
        set_param(&mut probe, array_idx, offset, theta);

        let fd = (up - down) / (2.0 * h);
        let g = analytic[coord];
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-12);
        if rel > max_rel {
            max_rel = rel;
            worst = (layout[array_idx].0.clone(), offset);
        }
    }

    Ok(GradCheckReport {
        coords_checked: coords.len(),
        max_rel_err: max_rel,
        worst_param: worst.0,
        worst_index: worst.1,
        tolerance: cfg.tolerance,
        pass: max_rel <= cfg.tolerance,
    })
}

fn analytic_source(net: &Network<f64>, array_idx: usize, offset: usize) -> f64 {
    net.params()[array_idx].tensor.data()[offset]
}

fn set_param(net: &mut Network<f64>, array_idx: usize, offset: usize, value: f64) {
    net.params_mut()[array_idx].tensor.data_mut()[offset] = value;
}

/// Computes the analytic gradient and verifies it against central
/// differences.
pub fn grad_check(
    net: &Network<f64>,
    windows: &[Window<f64>],
    loss_cfg: &LossConfig,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let (_, grads) = batch_gradient(net, windows, loss_cfg)?;
    verify_gradients(net, windows, loss_cfg, cfg, &grads)
}
