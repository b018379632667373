//! Flat run configuration: built-in defaults, overridden key-by-key from an
//! optional TOML file, then by command-line flags. The effective result is
//! echoed into the output directory so every run is self-describing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ubernet::{Error, Result};

/// Every knob of every command, flat, with a default. Field names are the
/// TOML keys; the matching command-line flags are the kebab-case spellings.
/// Unknown keys in a config file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // ---- files and directories ----
    /// Panel CSV (`datetime,p,<features...>`).
    pub panel: String,
    /// Missing-value mask CSV. Empty = use `<panel>.mask.csv` when present.
    pub mask: String,
    /// Feature schema CSV.
    pub schema: String,
    /// Output directory; every artifact lands here.
    pub out: String,
    /// Checkpoint file; a relative path is resolved inside `out`.
    pub checkpoint: String,
    /// Pickup events CSV for `ingest` (`datetime,region`).
    pub events: String,
    /// Directory of feature tables for `ingest` (every `*.csv` inside).
    pub features_dir: String,
    /// Region adjacency CSV for `ingest` imputation. Empty = no adjacency.
    pub adjacency: String,
    /// Restrict `ingest` to one region. Empty = all regions pooled.
    pub region: String,

    // ---- time grid and windowing ----
    /// Slot length δ in minutes.
    pub interval_minutes: u32,
    /// Lookback s: each model window covers s+1 consecutive slots.
    pub lookback: usize,

    // ---- model ----
    /// Forecaster: ubernet | seasonal_naive | persistence | ridge_arx | oracle.
    pub model: String,
    /// Bottleneck width k (the network runs at width 2k).
    pub channels: usize,
    /// Per-feature embedding width.
    pub embed_width: usize,
    /// Comma-separated residual-block dilations, e.g. "1,2,4".
    pub dilations: String,
    /// Block activation: gated | identity.
    pub activation: String,
    /// Forecast head readout: last | max_pool.
    pub head: String,
    /// Feed past pickups to the network (they always remain the target).
    pub include_pickups: bool,

    // ---- training ----
    /// SGD learning rate η.
    pub lr: f64,
    /// Training epochs.
    pub epochs: usize,
    /// Windows per SGD update.
    pub batch_size: usize,
    /// L2 penalty λ.
    pub l2: f64,
    /// L1 penalty.
    pub l1: f64,
    /// Base seed for initialization, shuffling, and derived per-job seeds.
    pub seed: u64,
    /// Reshuffle window order every epoch.
    pub shuffle: bool,
    /// Abort training when a mini-batch loss exceeds this.
    pub divergence_threshold: f64,
    /// Evaluate gradient chunks across threads (bit-identical results).
    pub parallel: bool,

    // ---- splitting and evaluation ----
    /// Train/test boundary (YYYY-MM-DDTHH:MM). Empty = use train_fraction.
    pub split_datetime: String,
    /// Fraction of slots that train when split_datetime is empty.
    pub train_fraction: f64,
    /// Rolling-CV fold count.
    pub folds: usize,
    /// Minimum fraction of slots reserved for the first fold's training.
    pub min_train_fraction: f64,
    /// Worker threads for fold/job fan-out. 0 = one per CPU.
    pub jobs: usize,
    /// Feature sets for `eval`: comma-separated tags A–D, or "all".
    pub sets: String,
    /// Permutation-importance repeats per feature.
    pub repeats: usize,
    /// Grid points for partial dependence.
    pub grid_points: usize,
    /// Feature swept by `pdp`.
    pub feature: String,
    /// Residual grouping for `breakdown`: hour | region.
    pub by: String,
    /// Seasonal-naive period in slots. 0 = one day (24h ÷ δ).
    pub period: usize,
    /// Autoregressive lag count for ridge_arx.
    pub p_lags: usize,
    /// Ridge strength for ridge_arx.
    pub alpha: f64,

    // ---- synthetic panel generation ----
    /// Slots to generate.
    pub synth_slots: usize,
    /// First slot start (YYYY-MM-DDTHH:MM).
    pub synth_start: String,
    /// Baseline pickup level.
    pub synth_base: f64,
    /// Amplitude of the 24-hour cycle.
    pub synth_diurnal: f64,
    /// Hour of day where the 24-hour cycle peaks.
    pub synth_peak_hour: f64,
    /// Amplitude of the 7-day cycle.
    pub synth_weekly: f64,
    /// Day of week (0 = Monday) where the 7-day cycle peaks.
    pub synth_peak_day: f64,
    /// Standard deviation of the additive noise.
    pub synth_sigma: f64,
    /// Exogenous drivers, e.g. "g:20,junk:noise" (weight or the word noise).
    pub synth_drivers: String,
    /// Emit categorical hour/day calendar features.
    pub synth_calendar: bool,

    // ---- gradient check ----
    /// Random trials for `gradcheck`.
    pub gc_trials: usize,
    /// Maximum tolerated relative error.
    pub gc_tolerance: f64,
    /// Finite-difference step.
    pub gc_step: f64,
    /// Coordinates probed per trial.
    pub gc_subsample: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            panel: "panel.csv".to_string(),
            mask: String::new(),
            schema: "schema.csv".to_string(),
            out: "out".to_string(),
            checkpoint: "checkpoint.json".to_string(),
            events: "pickups.csv".to_string(),
            features_dir: "features".to_string(),
            adjacency: String::new(),
            region: String::new(),
            interval_minutes: 15,
            lookback: 16,
            model: "ubernet".to_string(),
            channels: 100,
            embed_width: 8,
            dilations: "1,2".to_string(),
            activation: "gated".to_string(),
            head: "last".to_string(),
            include_pickups: true,
            lr: 1e-3,
            epochs: 100,
            batch_size: 32,
            l2: 1e-4,
            l1: 0.0,
            seed: 0,
            shuffle: true,
            divergence_threshold: 1e12,
            parallel: true,
            split_datetime: String::new(),
            train_fraction: 0.8,
            folds: 5,
            min_train_fraction: 0.5,
            jobs: 0,
            sets: "all".to_string(),
            repeats: 5,
            grid_points: 20,
            feature: String::new(),
            by: "hour".to_string(),
            period: 0,
            p_lags: 8,
            alpha: 1.0,
            synth_slots: 2000,
            synth_start: "2014-01-06T00:00".to_string(),
            synth_base: 60.0,
            synth_diurnal: 25.0,
            synth_peak_hour: 17.0,
            synth_weekly: 10.0,
            synth_peak_day: 4.0,
            synth_sigma: 5.0,
            synth_drivers: String::new(),
            synth_calendar: true,
            gc_trials: 100,
            gc_tolerance: 1e-4,
            gc_step: 1e-5,
            gc_subsample: 200,
        }
    }
}

fn line_of(text: &str, offset: usize) -> u64 {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|b| *b == b'\n')
        .count() as u64
        + 1
}

impl RunConfig {
    /// Built-in defaults, overlaid with `path` when given. Keys absent from
    /// the file keep their defaults; keys the config does not know are
    /// rejected, naming the file and line.
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{file}: {e}"))))?;
        toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| line_of(&text, s.start)).unwrap_or(1);
            Error::parse(file, line, e.message().to_string())
        })
    }

    /// Writes the effective configuration into `out_dir`.
    pub fn echo(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("effective_config.toml");
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::format(format!("could not encode effective config: {e}")))?;
        std::fs::write(&path, text)?;
        Ok(path)
    }

    /// The checkpoint path, resolved inside the output directory unless
    /// absolute.
    pub fn checkpoint_path(&self) -> PathBuf {
        let p = Path::new(&self.checkpoint);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            Path::new(&self.out).join(p)
        }
    }
}
