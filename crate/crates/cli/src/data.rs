//! Shared plumbing between commands: loading inputs, resolving the
//! train/test split, turning flat config keys into typed settings, and the
//! forecaster factory behind the `model` key.

use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use ubernet::error::{Error, Result};
use ubernet::eval::{
    HarnessSettings, NetSettings, OneStepForecaster, OracleForecaster, PersistenceForecaster,
    RidgeArxForecaster, SeasonalNaiveForecaster, SetSelector, UberNetForecaster,
};
use ubernet::net::{Activation, Network};
use ubernet::panel::{
    build_windows_with, fit_normalizer, mask_path_for, read_panel, read_schema, DriverSpec,
    FeatureSchema, Normalizer, Panel, WindowOptions,
};
use ubernet::train::{
    fit, load_checkpoint_for_schema, FitConfig, FitReport, LossConfig,
};

use crate::config::RunConfig;

pub const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M";

pub fn parse_datetime(value: &str, what: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(value.trim(), TIME_FORMAT)
        .map_err(|_| Error::input(format!("{what} must look like 2014-01-06T00:00, got '{value}'")))
}

pub fn parse_dilations(text: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        return Err(Error::input("dilations must list at least one block, e.g. \"1,2\""));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| Error::input(format!("dilation '{p}' is not a whole number")))
        })
        .collect()
}

pub fn parse_activation(text: &str) -> Result<Activation> {
    match text.to_ascii_lowercase().as_str() {
        "gated" => Ok(Activation::Gated),
        "identity" => Ok(Activation::Identity),
        other => Err(Error::input(format!(
            "unknown activation '{other}' (expected 'gated' or 'identity')"
        ))),
    }
}

/// `head` chooses how the forecast reads the block stack: `last` (the final
/// timestep) or `max_pool` (per-channel max over time).
pub fn parse_head(text: &str) -> Result<bool> {
    match text.to_ascii_lowercase().as_str() {
        "last" => Ok(false),
        "max_pool" => Ok(true),
        other => Err(Error::input(format!(
            "unknown head '{other}' (expected 'last' or 'max_pool')"
        ))),
    }
}

/// "g:20,junk:noise" → a weighted smooth driver and a pure-noise driver.
pub fn parse_drivers(text: &str) -> Result<Vec<DriverSpec>> {
    let mut drivers = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, spec) = part.split_once(':').ok_or_else(|| {
            Error::input(format!(
                "driver '{part}' must be name:weight or name:noise, e.g. \"g:20\""
            ))
        })?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::input(format!("driver '{part}' has an empty name")));
        }
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("noise") {
            drivers.push(DriverSpec::noise(name));
        } else {
            let weight = spec.parse::<f64>().map_err(|_| {
                Error::input(format!("driver weight '{spec}' is not a number (or 'noise')"))
            })?;
            drivers.push(DriverSpec::smooth(name, weight));
        }
    }
    Ok(drivers)
}

pub fn parse_sets(text: &str) -> Result<Vec<SetSelector>> {
    let mut sets = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let sel = SetSelector::parse(part)
            .ok_or_else(|| Error::input(format!("unknown feature set '{part}' (A–D or 'all')")))?;
        sets.push(sel);
    }
    if sets.is_empty() {
        return Err(Error::input("sets must name at least one feature set"));
    }
    Ok(sets)
}

/// Reads the schema and panel named by the config. The mask sidecar is used
/// automatically when present; an explicit `mask` path must exist.
pub fn load_panel(cfg: &RunConfig) -> Result<(FeatureSchema, Panel)> {
    let schema = read_schema(Path::new(&cfg.schema))?;
    let panel_path = Path::new(&cfg.panel);
    let mask: Option<PathBuf> = if cfg.mask.is_empty() {
        let sidecar = mask_path_for(panel_path);
        sidecar.exists().then_some(sidecar)
    } else {
        Some(PathBuf::from(&cfg.mask))
    };
    let panel = read_panel(panel_path, mask.as_deref(), &schema)?;
    Ok((schema, panel))
}

/// First test slot: everything before trains, everything from it on tests.
pub fn resolve_train_end(cfg: &RunConfig, panel: &Panel) -> Result<usize> {
    let slots = panel.slots();
    let train_end = if cfg.split_datetime.is_empty() {
        if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
            return Err(Error::contract(format!(
                "train_fraction must be strictly between 0 and 1, got {}",
                cfg.train_fraction
            )));
        }
        (slots as f64 * cfg.train_fraction).floor() as usize
    } else {
        panel.slot_at_boundary(parse_datetime(&cfg.split_datetime, "split_datetime")?)?
    };
    if train_end == 0 || train_end >= slots {
        return Err(Error::contract(format!(
            "split at slot {train_end} leaves no {} data ({slots} slots total)",
            if train_end == 0 { "training" } else { "test" }
        )));
    }
    Ok(train_end)
}

pub fn net_settings(cfg: &RunConfig) -> Result<NetSettings> {
    Ok(NetSettings {
        lookback: cfg.lookback,
        channels: cfg.channels,
        embed_width: cfg.embed_width,
        dilations: parse_dilations(&cfg.dilations)?,
        activation: parse_activation(&cfg.activation)?,
        max_pool_head: parse_head(&cfg.head)?,
        include_pickups: cfg.include_pickups,
    })
}

pub fn fit_config(cfg: &RunConfig) -> FitConfig {
    FitConfig {
        lr: cfg.lr,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
        shuffle: cfg.shuffle,
        divergence_threshold: cfg.divergence_threshold,
        parallel: cfg.parallel,
    }
}

pub fn loss_config(cfg: &RunConfig) -> LossConfig {
    LossConfig { l2: cfg.l2, l1: cfg.l1 }
}

pub fn harness_settings(cfg: &RunConfig, train_end: usize) -> Result<HarnessSettings> {
    Ok(HarnessSettings {
        net: net_settings(cfg)?,
        loss: loss_config(cfg),
        fit: fit_config(cfg),
        train_end,
    })
}

/// Seasonal period in slots: the `period` key, or one day by default.
pub fn seasonal_period(cfg: &RunConfig, panel: &Panel) -> Result<usize> {
    if cfg.period > 0 {
        return Ok(cfg.period);
    }
    let per_day = 24 * 60;
    let delta = panel.grid.interval_minutes();
    if per_day % delta != 0 {
        return Err(Error::contract(format!(
            "cannot derive a daily period from a {delta}-minute interval; set `period` explicitly"
        )));
    }
    Ok((per_day / delta) as usize)
}

pub type ForecasterFactory = Box<dyn Fn(u64) -> Box<dyn OneStepForecaster + Send> + Sync>;

/// Builds the per-fold forecaster factory behind the `model` key. The seed
/// handed to the factory is already fold-specific.
pub fn forecaster_factory(cfg: &RunConfig, panel: &Panel) -> Result<ForecasterFactory> {
    match cfg.model.as_str() {
        "ubernet" => {
            let net = net_settings(cfg)?;
            let loss = loss_config(cfg);
            let fit_cfg = fit_config(cfg);
            Ok(Box::new(move |seed| {
                Box::new(UberNetForecaster::new(
                    net.clone(),
                    loss,
                    FitConfig { seed, ..fit_cfg },
                ))
            }))
        }
        "seasonal_naive" => {
            let period = seasonal_period(cfg, panel)?;
            Ok(Box::new(move |_| Box::new(SeasonalNaiveForecaster { period })))
        }
        "persistence" => Ok(Box::new(|_| Box::new(PersistenceForecaster))),
        "ridge_arx" => {
            let p_lags = cfg.p_lags;
            let alpha = cfg.alpha;
            Ok(Box::new(move |_| {
                Box::new(RidgeArxForecaster::new(p_lags, None, alpha))
            }))
        }
        "oracle" => Ok(Box::new(|_| Box::new(OracleForecaster))),
        other => Err(Error::input(format!(
            "unknown model '{other}' (expected ubernet, seasonal_naive, persistence, ridge_arx, or oracle)"
        ))),
    }
}

/// A network trained on the panel's training prefix, plus everything needed
/// to use and persist it.
pub struct TrainedNet {
    pub net: Network<f64>,
    pub normalizer: Normalizer,
    pub report: FitReport,
    pub train_end: usize,
}

/// Fits the normalizer on the training prefix, initializes the network from
/// the configured seed, and trains on every teacher-forced training window.
pub fn train_network(cfg: &RunConfig, panel: &Panel) -> Result<TrainedNet> {
    if cfg.model != "ubernet" {
        return Err(Error::contract(format!(
            "only the ubernet model trains to a checkpoint; '{}' is fit inside cv/eval directly",
            cfg.model
        )));
    }
    let train_end = resolve_train_end(cfg, panel)?;
    let settings = net_settings(cfg)?;
    let s = settings.lookback;
    if train_end < s + 2 {
        return Err(Error::contract(format!(
            "training prefix of {train_end} slot(s) cannot hold a single lookback-{s} window"
        )));
    }
    let normalizer = fit_normalizer(panel, 0..train_end)?;
    let normalized = normalizer.apply(panel)?;
    let config = settings.to_config(panel)?;
    let mut net = Network::<f64>::init(&config, cfg.seed)?;
    let mut opts = WindowOptions::new(s).targets(s + 1..train_end);
    if !settings.include_pickups {
        opts = opts.without_pickups();
    }
    let windows = build_windows_with(&normalized, &opts)?;
    let report = fit(&mut net, &windows, &loss_config(cfg), &fit_config(cfg))?;
    Ok(TrainedNet { net, normalizer, report, train_end })
}

/// Where an analysis network came from.
pub enum NetSource {
    Checkpoint(PathBuf),
    TrainedInProcess,
}

impl std::fmt::Display for NetSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NetSource::Checkpoint(p) => write!(f, "loaded checkpoint {}", p.display()),
            NetSource::TrainedInProcess => f.write_str("no checkpoint found; trained in-process"),
        }
    }
}

/// A trained network for analysis commands: the configured checkpoint when
/// it exists (validated against the schema fingerprint), otherwise a fresh
/// in-process training run.
pub fn acquire_net(
    cfg: &RunConfig,
    schema: &FeatureSchema,
    panel: &Panel,
) -> Result<(Network<f64>, Normalizer, NetSource)> {
    let path = cfg.checkpoint_path();
    if path.exists() {
        let ck = load_checkpoint_for_schema(&path, &schema.fingerprint())?;
        Ok((ck.network, ck.normalizer, NetSource::Checkpoint(path)))
    } else {
        let trained = train_network(cfg, panel)?;
        Ok((trained.net, trained.normalizer, NetSource::TrainedInProcess))
    }
}

/// Creates the output directory and writes one artifact into it.
pub fn write_artifact(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = out.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}

pub fn to_pretty_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(format!("could not encode report: {e}")))?;
    text.push('\n');
    Ok(text)
}
