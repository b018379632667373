//! Plain stochastic gradient descent over teacher-forced windows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Network;
use crate::panel::{Window, WindowBatch};
use crate::scalar::Scalar;
use crate::train::backprop::{batch_gradient, batch_gradient_parallel};
use crate::train::loss::LossConfig;
use crate::train::apply_update;

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Learning rate.
    pub lr: f64,
    /// Full passes over the training windows.
    pub epochs: usize,
    /// Windows per SGD update.
    pub batch_size: usize,
    /// Seed for the per-epoch shuffle.
    pub seed: u64,
    /// Reshuffle window order every epoch (on by default).
    pub shuffle: bool,
    /// Abort with a divergence error when a mini-batch loss exceeds this.
    pub divergence_threshold: f64,
    /// Evaluate gradient chunks across threads. The result is bit-identical
    /// to the sequential path.
    pub parallel: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lr: 1e-3,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            shuffle: true,
            divergence_threshold: 1e12,
            parallel: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::contract(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::contract("batch size must be at least 1"));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::contract("divergence threshold must be positive"));
        }
        Ok(())
    }
}

/// Training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean loss per epoch (over all windows, penalty included).
    pub epoch_loss: Vec<f64>,
    /// Total SGD updates performed.
    pub iterations: usize,
    /// Last epoch's mean loss (0.0 when `epochs` is 0).
    pub final_loss: f64,
}

/// Trains the network in place with mini-batch SGD (`w ← w − lr·∇E`).
///
/// Training is strictly teacher-forced: every window must consist of
/// observed history. Windows whose history contains model output (as built
/// by iterative inference) are rejected outright.
pub fn fit<S: Scalar>(
    net: &mut Network<S>,
    batch: &WindowBatch<S>,
    loss_cfg: &LossConfig,
    cfg: &FitConfig,
) -> Result<FitReport> {
    cfg.validate()?;
    loss_cfg.validate()?;
    if batch.windows.is_empty() {
        return Err(Error::contract("training needs at least one window"));
    }
    if batch.lookback != net.config.lookback {
        return Err(Error::contract(format!(
            "window lookback {} does not match the network's {}",
            batch.lookback, net.config.lookback
        )));
    }
    if let Some(w) = batch.windows.iter().find(|w| w.synthetic_history) {
        return Err(Error::contract(format!(
            "window targeting slot {} contains model output in its history; training must be teacher-forced on observed values",
            w.target_slot
        )));
    }

    let n = batch.windows.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut iterations = 0usize;

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut weighted = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let minibatch: Vec<&Window<S>> = chunk.iter().map(|i| &batch.windows[*i]).collect();
            let (loss, grads) = if cfg.parallel {
                batch_gradient_parallel(net, &minibatch, loss_cfg)?
            } else {
                batch_gradient(net, &minibatch, loss_cfg)?
            };
            let loss = loss.to64();
            if !loss.is_finite() || loss > cfg.divergence_threshold {
                return Err(Error::Divergence { epoch });
            }
            apply_update(net, &grads, S::of(cfg.lr));
            iterations += 1;
            weighted += loss * chunk.len() as f64 / n as f64;
        }
        epoch_loss.push(weighted);
    }

    let final_loss = epoch_loss.last().copied().unwrap_or(0.0);
    Ok(FitReport { epoch_loss, iterations, final_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{InputSpec, NetworkConfig};
    use crate::panel::{build_windows_with, fit_normalizer, synth_panel, SynthConfig, WindowOptions};

    fn training_setup(slots: usize, lookback: usize) -> (NetworkConfig, WindowBatch<f64>) {
        let synth = SynthConfig { slots, noise_sigma: 3.0, seed: 7, ..SynthConfig::default() };
        let panel = synth_panel(&synth).unwrap();
        let normalizer = fit_normalizer(&panel, 0..slots).unwrap();
        let normalized = normalizer.apply(&panel).unwrap();
        let batch = build_windows_with(&normalized, &WindowOptions::new(lookback)).unwrap();
        let inputs = vec![
            InputSpec::continuous("p"),
            InputSpec::categorical("hour", 24),
            InputSpec::categorical("day", 7),
        ];
        let config = NetworkConfig {
            channels: 4,
            embed_width: 3,
            ..NetworkConfig::desk(inputs, lookback)
        };
        (config, batch)
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_untouched() {
        let (config, batch) = training_setup(80, 6);
        let mut net = Network::<f64>::init(&config, 1).unwrap();
        let before = net.clone();
        let cfg = FitConfig { lr: 0.0, epochs: 4, batch_size: 8, ..Default::default() };
        let report = fit(&mut net, &batch, &LossConfig::default(), &cfg).unwrap();
        assert_eq!(net, before);
        assert_eq!(report.epoch_loss.len(), 4);
        for pair in report.epoch_loss.windows(2) {
            approx::assert_relative_eq!(pair[0], pair[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn same_seed_reproduces_parameters_bit_for_bit() {
        let (config, batch) = training_setup(80, 6);
        let loss_cfg = LossConfig::ridge(1e-4);
        let cfg = FitConfig { lr: 0.01, epochs: 3, batch_size: 8, seed: 5, ..Default::default() };
        let mut a = Network::<f64>::init(&config, 1).unwrap();
        let mut b = Network::<f64>::init(&config, 1).unwrap();
        let ra = fit(&mut a, &batch, &loss_cfg, &cfg).unwrap();
        let rb = fit(&mut b, &batch, &loss_cfg, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.epoch_loss, rb.epoch_loss);

        let mut c = Network::<f64>::init(&config, 1).unwrap();
        let rc = fit(&mut c, &batch, &loss_cfg, &FitConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(ra.epoch_loss, rc.epoch_loss, "different shuffle order should change the path");
    }

    #[test]
    fn parallel_training_matches_sequential_bit_for_bit() {
        let (config, batch) = training_setup(60, 6);
        let loss_cfg = LossConfig::ridge(1e-4);
        let base = FitConfig { lr: 0.01, epochs: 2, batch_size: 24, seed: 3, ..Default::default() };
        let mut a = Network::<f64>::init(&config, 2).unwrap();
        let mut b = Network::<f64>::init(&config, 2).unwrap();
        fit(&mut a, &batch, &loss_cfg, &base).unwrap();
        fit(&mut b, &batch, &loss_cfg, &FitConfig { parallel: true, ..base }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_decreases_on_average_and_overfits_a_single_window() {
        let (config, batch) = training_setup(80, 6);
        let single = WindowBatch {
            lookback: batch.lookback,
            includes_pickups: batch.includes_pickups,
            windows: vec![batch.windows[10].clone()],
        };
        let mut net = Network::<f64>::init(&config, 4).unwrap();
        let cfg = FitConfig { lr: 0.05, epochs: 500, batch_size: 1, ..Default::default() };
        let report = fit(&mut net, &single, &LossConfig::default(), &cfg).unwrap();
        let initial = report.epoch_loss[0];
        assert!(initial > 0.0);
        assert!(
            report.final_loss < 1e-6 * initial,
            "final {:.3e} vs initial {:.3e}",
            report.final_loss,
            initial
        );
        assert_eq!(report.iterations, 500);
    }

    #[test]
    fn windows_with_model_output_in_history_are_rejected() {
        let (config, mut batch) = training_setup(60, 6);
        batch.windows[3].synthetic_history = true;
        let mut net = Network::<f64>::init(&config, 1).unwrap();
        let err = fit(&mut net, &batch, &LossConfig::default(), &FitConfig::default()).unwrap_err();
        assert!(err.to_string().contains("teacher-forced"), "{err}");
    }

    #[test]
    fn exploding_updates_abort_with_the_epoch_index() {
        let (config, batch) = training_setup(80, 6);
        let mut net = Network::<f64>::init(&config, 1).unwrap();
        let cfg = FitConfig { lr: 1e6, epochs: 10, batch_size: 8, ..Default::default() };
        match fit(&mut net, &batch, &LossConfig::default(), &cfg) {
            Err(Error::Divergence { epoch }) => assert!(epoch <= 1, "diverged at epoch {epoch}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn tiny_threshold_trips_immediately() {
        let (config, batch) = training_setup(60, 6);
        let mut net = Network::<f64>::init(&config, 1).unwrap();
        let cfg = FitConfig { divergence_threshold: 1e-15, ..Default::default() };
        match fit(&mut net, &batch, &LossConfig::default(), &cfg) {
            Err(Error::Divergence { epoch }) => assert_eq!(epoch, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn lookback_mismatch_is_rejected() {
        let (config, batch) = training_setup(60, 6);
        let bad = NetworkConfig { lookback: 5, ..config };
        let mut net = Network::<f64>::init(&bad, 1).unwrap();
        assert!(fit(&mut net, &batch, &LossConfig::default(), &FitConfig::default()).is_err());
    }
}
