//! `ubernet` — short-term demand forecasting on a regular time grid.
//!
//! Every run reads one flat key/value config (defaults < `--config` file <
//! command-line flags), echoes the effective config into the output
//! directory, and writes fixed-name artifacts there. Exit codes: 0 success,
//! 1 runtime error, 2 schema error, 3 parse error, 4 training divergence,
//! 5 checkpoint/schema mismatch.

mod commands;
mod config;
mod data;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use ubernet::Error;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "ubernet",
    version,
    about = "Temporal convolutional forecasting for slotted demand panels",
    after_help = "Exit codes: 0 success, 1 runtime error, 2 schema error, \
                  3 parse error, 4 training divergence, 5 checkpoint/schema mismatch.\n\
                  Every flag mirrors a config-file key of the same name; \
                  precedence is defaults, then --config file, then flags.",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// TOML config file; its keys are exactly the flags below. [default: none]
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Count pickup events into a slotted panel, join features, impute gaps
    Ingest,
    /// Generate a synthetic panel with known structure
    Synth,
    /// Train the network and save a checkpoint
    Train,
    /// Score feature-set combinations on the held-out tail
    Eval,
    /// Rolling-origin cross-validation of one model
    Cv,
    /// Leave-one-feature-out retraining
    Ablate,
    /// Permutation importance on held-out windows
    Importance,
    /// Partial-dependence curve for one feature
    Pdp,
    /// Residual metrics sliced by hour or region
    Breakdown,
    /// Compare analytic gradients with finite differences
    Gradcheck,
}

/// Command-line overrides, one flag per config key. Each doc string ends
/// with the built-in default so `--help` documents every key.
#[derive(clap::Args)]
struct Overrides {
    /// Panel CSV (`datetime,p,<features...>`). [default: panel.csv]
    #[arg(long, global = true, value_name = "PATH")]
    panel: Option<String>,
    /// Missing-value mask CSV; empty = use `<panel>.mask.csv` when present. [default: ""]
    #[arg(long, global = true, value_name = "PATH")]
    mask: Option<String>,
    /// Feature schema CSV. [default: schema.csv]
    #[arg(long, global = true, value_name = "PATH")]
    schema: Option<String>,
    /// Output directory; every artifact lands here. [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,
    /// Checkpoint file; a relative path is resolved inside `out`. [default: checkpoint.json]
    #[arg(long, global = true, value_name = "PATH")]
    checkpoint: Option<String>,
    /// Pickup events CSV for `ingest` (`datetime,region`). [default: pickups.csv]
    #[arg(long, global = true, value_name = "PATH")]
    events: Option<String>,
    /// Directory of feature tables for `ingest` (every `*.csv` inside). [default: features]
    #[arg(long, global = true, value_name = "DIR")]
    features_dir: Option<String>,
    /// Region adjacency CSV for `ingest` imputation; empty = none. [default: ""]
    #[arg(long, global = true, value_name = "PATH")]
    adjacency: Option<String>,
    /// Restrict `ingest` to one region; empty = all regions pooled. [default: ""]
    #[arg(long, global = true, value_name = "NAME")]
    region: Option<String>,

    /// Slot length δ in minutes. [default: 15]
    #[arg(long, global = true, value_name = "MIN")]
    interval_minutes: Option<u32>,
    /// Lookback s: each model window covers s+1 consecutive slots. [default: 16]
    #[arg(long, global = true, value_name = "SLOTS")]
    lookback: Option<usize>,

    /// Forecaster: ubernet | seasonal_naive | persistence | ridge_arx | oracle. [default: ubernet]
    #[arg(long, global = true, value_name = "NAME")]
    model: Option<String>,
    /// Bottleneck width k (the network runs at width 2k). [default: 100]
    #[arg(long, global = true, value_name = "K")]
    channels: Option<usize>,
    /// Per-feature embedding width. [default: 8]
    #[arg(long, global = true, value_name = "W")]
    embed_width: Option<usize>,
    /// Comma-separated residual-block dilations, e.g. "1,2,4". [default: 1,2]
    #[arg(long, global = true, value_name = "LIST")]
    dilations: Option<String>,
    /// Block activation: gated | identity. [default: gated]
    #[arg(long, global = true, value_name = "NAME")]
    activation: Option<String>,
    /// Forecast head readout: last | max_pool. [default: last]
    #[arg(long, global = true, value_name = "NAME")]
    head: Option<String>,
    /// Feed past pickups to the network (they always remain the target). [default: true]
    #[arg(long, global = true, value_name = "BOOL")]
    include_pickups: Option<bool>,

    /// SGD learning rate η. [default: 0.001]
    #[arg(long, global = true, value_name = "LR")]
    lr: Option<f64>,
    /// Training epochs. [default: 100]
    #[arg(long, global = true, value_name = "N")]
    epochs: Option<usize>,
    /// Windows per SGD update. [default: 32]
    #[arg(long, global = true, value_name = "N")]
    batch_size: Option<usize>,
    /// L2 penalty λ. [default: 0.0001]
    #[arg(long, global = true, value_name = "λ")]
    l2: Option<f64>,
    /// L1 penalty. [default: 0]
    #[arg(long, global = true, value_name = "λ")]
    l1: Option<f64>,
    /// Base seed for initialization, shuffling, and derived per-job seeds. [default: 0]
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Reshuffle window order every epoch. [default: true]
    #[arg(long, global = true, value_name = "BOOL")]
    shuffle: Option<bool>,
    /// Abort training when a mini-batch loss exceeds this. [default: 1e12]
    #[arg(long, global = true, value_name = "LOSS")]
    divergence_threshold: Option<f64>,
    /// Evaluate gradient chunks across threads (bit-identical results). [default: true]
    #[arg(long, global = true, value_name = "BOOL")]
    parallel: Option<bool>,

    /// Train/test boundary (YYYY-MM-DDTHH:MM); empty = use train_fraction. [default: ""]
    #[arg(long, global = true, value_name = "TIME")]
    split_datetime: Option<String>,
    /// Fraction of slots that train when split_datetime is empty. [default: 0.8]
    #[arg(long, global = true, value_name = "F")]
    train_fraction: Option<f64>,
    /// Rolling-CV fold count. [default: 5]
    #[arg(long, global = true, value_name = "N")]
    folds: Option<usize>,
    /// Minimum fraction of slots reserved for the first fold's training. [default: 0.5]
    #[arg(long, global = true, value_name = "F")]
    min_train_fraction: Option<f64>,
    /// Worker threads for fold/job fan-out; 0 = one per CPU. [default: 0]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Feature sets for `eval`: comma-separated tags A–D, or "all". [default: all]
    #[arg(long, global = true, value_name = "SETS")]
    sets: Option<String>,
    /// Permutation-importance repeats per feature. [default: 5]
    #[arg(long, global = true, value_name = "N")]
    repeats: Option<usize>,
    /// Grid points for partial dependence. [default: 20]
    #[arg(long, global = true, value_name = "N")]
    grid_points: Option<usize>,
    /// Feature swept by `pdp`. [default: ""]
    #[arg(long, global = true, value_name = "NAME")]
    feature: Option<String>,
    /// Residual grouping for `breakdown`: hour | region. [default: hour]
    #[arg(long, global = true, value_name = "KEY")]
    by: Option<String>,
    /// Seasonal-naive period in slots; 0 = one day (24h ÷ δ). [default: 0]
    #[arg(long, global = true, value_name = "SLOTS")]
    period: Option<usize>,
    /// Autoregressive lag count for ridge_arx. [default: 8]
    #[arg(long, global = true, value_name = "N")]
    p_lags: Option<usize>,
    /// Ridge strength for ridge_arx. [default: 1]
    #[arg(long, global = true, value_name = "α")]
    alpha: Option<f64>,

    /// Slots to generate with `synth`. [default: 2000]
    #[arg(long, global = true, value_name = "N")]
    synth_slots: Option<usize>,
    /// First generated slot start (YYYY-MM-DDTHH:MM). [default: 2014-01-06T00:00]
    #[arg(long, global = true, value_name = "TIME")]
    synth_start: Option<String>,
    /// Baseline pickup level. [default: 60]
    #[arg(long, global = true, value_name = "X")]
    synth_base: Option<f64>,
    /// Amplitude of the 24-hour cycle. [default: 25]
    #[arg(long, global = true, value_name = "X")]
    synth_diurnal: Option<f64>,
    /// Hour of day where the 24-hour cycle peaks. [default: 17]
    #[arg(long, global = true, value_name = "H")]
    synth_peak_hour: Option<f64>,
    /// Amplitude of the 7-day cycle. [default: 10]
    #[arg(long, global = true, value_name = "X")]
    synth_weekly: Option<f64>,
    /// Day of week (0 = Monday) where the 7-day cycle peaks. [default: 4]
    #[arg(long, global = true, value_name = "D")]
    synth_peak_day: Option<f64>,
    /// Standard deviation of the additive noise. [default: 5]
    #[arg(long, global = true, value_name = "σ")]
    synth_sigma: Option<f64>,
    /// Exogenous drivers, e.g. "g:20,junk:noise" (weight or the word noise). [default: ""]
    #[arg(long, global = true, value_name = "SPEC")]
    synth_drivers: Option<String>,
    /// Emit categorical hour/day calendar features. [default: true]
    #[arg(long, global = true, value_name = "BOOL")]
    synth_calendar: Option<bool>,

    /// Random trials for `gradcheck`. [default: 100]
    #[arg(long, global = true, value_name = "N")]
    gc_trials: Option<usize>,
    /// Maximum tolerated relative error. [default: 0.0001]
    #[arg(long, global = true, value_name = "ε")]
    gc_tolerance: Option<f64>,
    /// Finite-difference step. [default: 0.00001]
    #[arg(long, global = true, value_name = "H")]
    gc_step: Option<f64>,
    /// Coordinates probed per trial. [default: 200]
    #[arg(long, global = true, value_name = "N")]
    gc_subsample: Option<usize>,
}

macro_rules! apply_overrides {
    ($cfg:expr, $over:expr, [ $($field:ident),* $(,)? ]) => {
        $( if let Some(v) = $over.$field { $cfg.$field = v; } )*
    };
}

impl Overrides {
    /// Lays the flags that were actually given over the config.
    fn apply(self, cfg: &mut RunConfig) {
        apply_overrides!(cfg, self, [
            panel, mask, schema, out, checkpoint, events, features_dir, adjacency, region,
            interval_minutes, lookback,
            model, channels, embed_width, dilations, activation, head, include_pickups,
            lr, epochs, batch_size, l2, l1, seed, shuffle, divergence_threshold, parallel,
            split_datetime, train_fraction, folds, min_train_fraction, jobs,
            sets, repeats, grid_points, feature, by, period, p_lags, alpha,
            synth_slots, synth_start, synth_base, synth_diurnal, synth_peak_hour,
            synth_weekly, synth_peak_day, synth_sigma, synth_drivers, synth_calendar,
            gc_trials, gc_tolerance, gc_step, gc_subsample,
        ]);
    }
}

/// Documented process exit codes by error family.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Schema(_) => 2,
        Error::Parse { .. } | Error::Format(_) => 3,
        Error::Divergence { .. } => 4,
        Error::Incompatible(_) => 5,
        _ => 1,
    }
}

fn run(cli: Cli) -> ubernet::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cli.overrides.apply(&mut cfg);

    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(|e| Error::contract(format!("could not size the thread pool: {e}")))?;
    }

    let out = PathBuf::from(&cfg.out);
    std::fs::create_dir_all(&out)?;
    let echoed = cfg.echo(&out)?;
    println!("wrote {}", echoed.display());

    match cli.command {
        Cmd::Ingest => commands::cmd_ingest(&cfg, &out),
        Cmd::Synth => commands::cmd_synth(&cfg, &out),
        Cmd::Train => commands::cmd_train(&cfg, &out),
        Cmd::Eval => commands::cmd_eval(&cfg, &out),
        Cmd::Cv => commands::cmd_cv(&cfg, &out),
        Cmd::Ablate => commands::cmd_ablate(&cfg, &out),
        Cmd::Importance => commands::cmd_importance(&cfg, &out),
        Cmd::Pdp => commands::cmd_pdp(&cfg, &out),
        Cmd::Breakdown => commands::cmd_breakdown(&cfg, &out),
        Cmd::Gradcheck => commands::cmd_gradcheck(&cfg, &out),
    }
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    });
}
