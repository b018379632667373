//! One-step forecaster adapters: the network and the reference models
//! behind one trait, so every model runs through the identical harness.

use serde::{Deserialize, Serialize};

use crate::baselines::{fit_ridge_arx, predict_ridge_arx, RidgeArxParams};
use crate::error::{Error, Result};
use crate::net::{Activation, InputSpec, Network, NetworkConfig};
use crate::panel::{build_windows_with, fit_normalizer, Kind, Normalizer, Panel, WindowOptions};
use crate::train::{fit, FitConfig, LossConfig};

/// A model that fits on a training prefix of a panel and then produces
/// teacher-forced one-step-ahead forecasts in raw pickup units.
pub trait OneStepForecaster {
    /// Report identifier (e.g. `"ubernet"`, `"seasonal_naive"`).
    fn name(&self) -> &str;

    /// Fits on panel slots `[0, train_end)`. Implementations must not read
    /// panel rows at or beyond `train_end`.
    fn fit(&mut self, panel: &Panel, train_end: usize) -> Result<()>;

    /// One-step forecast for `target_slot`, given observed history before
    /// it. Must be called with the same panel that was passed to `fit`.
    fn predict(&self, panel: &Panel, target_slot: usize) -> Result<f64>;
}

/// Derives the network's input declarations from a panel: the pickups
/// column (when included) plus one input per schema feature. Categorical
/// cardinalities are the panel-wide code universe (max code + 1).
pub fn network_inputs(panel: &Panel, include_pickups: bool) -> Result<Vec<InputSpec>> {
    let mut inputs = Vec::with_capacity(1 + panel.schema.len());
    if include_pickups {
        inputs.push(InputSpec::continuous("p"));
    }
    for (i, def) in panel.schema.features().iter().enumerate() {
        match def.kind {
            Kind::Continuous => inputs.push(InputSpec::continuous(&def.name)),
            Kind::Categorical => {
                let mut max_code = 0usize;
                for &v in &panel.features[i] {
                    if !v.is_finite() || v < -1e-9 || (v - v.round()).abs() > 1e-9 {
                        return Err(Error::input(format!(
                            "categorical feature '{}' holds non-code value {v}",
                            def.name
                        )));
                    }
                    max_code = max_code.max(v.round() as usize);
                }
                inputs.push(InputSpec::categorical(&def.name, max_code + 1));
            }
        }
    }
    if inputs.is_empty() {
        return Err(Error::contract(
            "a network needs at least one input column",
        ));
    }
    Ok(inputs)
}

/// Architecture hyperparameters, independent of any particular panel's
/// feature list (inputs are derived from the panel at fit time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSettings {
    pub lookback: usize,
    pub channels: usize,
    pub embed_width: usize,
    pub dilations: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub max_pool_head: bool,
    /// Feed past pickups to the model (they always remain the target).
    #[serde(default = "default_true")]
    pub include_pickups: bool,
}

fn default_true() -> bool {
    true
}

impl NetSettings {
    /// Small test-scale profile.
    pub fn desk(lookback: usize) -> NetSettings {
        NetSettings {
            lookback,
            channels: 8,
            embed_width: 4,
            dilations: vec![1, 2],
            activation: Activation::Gated,
            max_pool_head: false,
            include_pickups: true,
        }
    }

    pub fn to_config(&self, panel: &Panel) -> Result<NetworkConfig> {
        let inputs = network_inputs(panel, self.include_pickups)?;
        Ok(NetworkConfig {
            channels: self.channels,
            embed_width: self.embed_width,
            dilations: self.dilations.clone(),
            activation: self.activation,
            max_pool_head: self.max_pool_head,
            ..NetworkConfig::standard(inputs, self.lookback)
        })
    }
}

/// Everything the harness needs to train and evaluate the network on one
/// chronological split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessSettings {
    pub net: NetSettings,
    pub loss: LossConfig,
    pub fit: FitConfig,
    /// Slots `[0, train_end)` train; `[train_end, slots)` evaluate.
    pub train_end: usize,
}

/// The network behind the [`OneStepForecaster`] trait: fitting refits the
/// normalizer on the training prefix, reinitializes the network from the
/// given seed, and trains on every in-train window.
pub struct UberNetForecaster {
    settings: NetSettings,
    loss: LossConfig,
    fit_cfg: FitConfig,
    state: Option<FittedNet>,
}

struct FittedNet {
    net: Network<f64>,
    normalizer: Normalizer,
    /// The fit panel, normalized end to end with train-range statistics.
    /// Test-range rows are only read at predict time (teacher forcing).
    normalized: Panel,
}

impl UberNetForecaster {
    pub fn new(settings: NetSettings, loss: LossConfig, fit_cfg: FitConfig) -> UberNetForecaster {
        UberNetForecaster {
            settings,
            loss,
            fit_cfg,
            state: None,
        }
    }

    /// Access to the fitted network and normalizer (for analyses that work
    /// on the model directly, like permutation importance).
    pub fn fitted(&self) -> Option<(&Network<f64>, &Normalizer)> {
        self.state.as_ref().map(|s| (&s.net, &s.normalizer))
    }
}

impl OneStepForecaster for UberNetForecaster {
    fn name(&self) -> &str {
        "ubernet"
    }

    fn fit(&mut self, panel: &Panel, train_end: usize) -> Result<()> {
        let s = self.settings.lookback;
        if train_end > panel.slots() {
            return Err(Error::range(format!(
                "train end {train_end} outside panel of {} slots",
                panel.slots()
            )));
        }
        if train_end < s + 2 {
            return Err(Error::contract(format!(
                "training prefix of {train_end} slots is too short for lookback {s} (needs at least {})",
                s + 2
            )));
        }
        let normalizer = fit_normalizer(panel, 0..train_end)?;
        let normalized = normalizer.apply(panel)?;
        let config = self.settings.to_config(panel)?;
        let mut net = Network::<f64>::init(&config, self.fit_cfg.seed)?;
        let mut opts = WindowOptions::new(s).targets(s + 1..train_end);
        if !self.settings.include_pickups {
            opts = opts.without_pickups();
        }
        let batch = build_windows_with(&normalized, &opts)?;
        fit(&mut net, &batch, &self.loss, &self.fit_cfg)?;
        self.state = Some(FittedNet {
            net,
            normalizer,
            normalized,
        });
        Ok(())
    }

    fn predict(&self, panel: &Panel, target_slot: usize) -> Result<f64> {
        let st = self
            .state
            .as_ref()
            .ok_or_else(|| Error::contract("forecaster must be fitted before predicting"))?;
        if panel.slots() != st.normalized.slots() || panel.schema != st.normalized.schema {
            return Err(Error::contract(
                "predict must be called with the same panel the forecaster was fitted on",
            ));
        }
        let s = self.settings.lookback;
        let mut opts = WindowOptions::new(s).targets(target_slot..target_slot + 1);
        if !self.settings.include_pickups {
            opts = opts.without_pickups();
        }
        let batch = build_windows_with(&st.normalized, &opts)?;
        let window = batch
            .windows
            .first()
            .ok_or_else(|| Error::range(format!("target slot {target_slot} yields no window")))?;
        let pred = st.net.predict(&window.input)?.scalar()?;
        Ok(st.normalizer.invert_pickup(pred))
    }
}

/// Forecasts each slot with the observation one season earlier.
pub struct SeasonalNaiveForecaster {
    pub period: usize,
}

impl OneStepForecaster for SeasonalNaiveForecaster {
    fn name(&self) -> &str {
        "seasonal_naive"
    }

    fn fit(&mut self, panel: &Panel, train_end: usize) -> Result<()> {
        if self.period == 0 {
            return Err(Error::contract("seasonal period must be at least 1"));
        }
        if train_end < self.period {
            return Err(Error::contract(format!(
                "seasonal naive needs at least {} training slots, got {train_end}",
                self.period
            )));
        }
        let _ = panel;
        Ok(())
    }

    fn predict(&self, panel: &Panel, target_slot: usize) -> Result<f64> {
        if target_slot < self.period {
            return Err(Error::input(format!(
                "target slot {target_slot} has no observation one period ({}) earlier",
                self.period
            )));
        }
        Ok(panel.pickups[target_slot - self.period])
    }
}

/// Forecasts each slot with the immediately preceding observation.
pub struct PersistenceForecaster;

impl OneStepForecaster for PersistenceForecaster {
    fn name(&self) -> &str {
        "persistence"
    }

    fn fit(&mut self, _panel: &Panel, train_end: usize) -> Result<()> {
        if train_end == 0 {
            return Err(Error::contract("persistence needs at least one training slot"));
        }
        Ok(())
    }

    fn predict(&self, panel: &Panel, target_slot: usize) -> Result<f64> {
        if target_slot == 0 {
            return Err(Error::input("slot 0 has no preceding observation"));
        }
        Ok(panel.pickups[target_slot - 1])
    }
}

/// Closed-form ridge ARX refit per fold.
pub struct RidgeArxForecaster {
    pub p_lags: usize,
    /// `None` uses every schema feature as an exogenous regressor.
    pub exogenous: Option<Vec<String>>,
    pub alpha: f64,
    params: Option<RidgeArxParams>,
}

impl RidgeArxForecaster {
    pub fn new(p_lags: usize, exogenous: Option<Vec<String>>, alpha: f64) -> RidgeArxForecaster {
        RidgeArxForecaster {
            p_lags,
            exogenous,
            alpha,
            params: None,
        }
    }
}

impl OneStepForecaster for RidgeArxForecaster {
    fn name(&self) -> &str {
        "ridge_arx"
    }

    fn fit(&mut self, panel: &Panel, train_end: usize) -> Result<()> {
        let exog: Vec<String> = match &self.exogenous {
            Some(list) => list.clone(),
            None => panel.schema.names().iter().map(|s| s.to_string()).collect(),
        };
        self.params = Some(fit_ridge_arx(panel, 0..train_end, self.p_lags, &exog, self.alpha)?);
        Ok(())
    }

    fn predict(&self, panel: &Panel, target_slot: usize) -> Result<f64> {
        let params = self
            .params
            .as_ref()
            .ok_or_else(|| Error::contract("forecaster must be fitted before predicting"))?;
        predict_ridge_arx(params, panel, target_slot)
    }
}

/// Returns the actual value — a perfect forecaster for harness testing.
pub struct OracleForecaster;

impl OneStepForecaster for OracleForecaster {
    fn name(&self) -> &str {
        "oracle"
    }

    fn fit(&mut self, _panel: &Panel, _train_end: usize) -> Result<()> {
        Ok(())
    }

    fn predict(&self, panel: &Panel, target_slot: usize) -> Result<f64> {
        Ok(panel.pickups[target_slot])
    }
}
