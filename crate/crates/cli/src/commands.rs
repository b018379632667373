//! One function per subcommand. Every command assumes the output directory
//! exists and the effective config has already been echoed into it; each
//! writes its fixed-name artifacts and prints one `wrote <path>` line per
//! file so runs are auditable from the terminal alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{NaiveDateTime, Timelike};
use serde::Serialize;
use ubernet::eval::{
    ablate_one_by_one, error_breakdown, evaluate_feature_sets, make_fold_plan,
    partial_dependence, permutation_importance, report as csv, rolling_cv, BreakdownKey,
};
use ubernet::net::Network;
use ubernet::panel::{
    aggregate_counts, build_windows_with, fit_normalizer, impute_missing, join_features,
    mask_path_for, read_adjacency, read_events, read_feature_table, read_schema, synth_panel,
    write_panel, write_schema, Adjacency, FeatureTable, Panel, RegionScope, SynthConfig, TimeGrid,
    WindowOptions,
};
use ubernet::train::{grad_check, save_checkpoint, CheckpointMeta, GradCheckConfig};
use ubernet::{derive_seed, Error, Result};

use crate::config::RunConfig;
use crate::data::{
    acquire_net, forecaster_factory, harness_settings, load_panel, loss_config, net_settings,
    parse_datetime, parse_drivers, parse_sets, resolve_train_end, to_pretty_json, train_network,
    write_artifact,
};

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

// ---------------------------------------------------------------- synth --

/// Generates a synthetic panel and writes it as `panel.csv`,
/// `panel.mask.csv`, and `schema.csv` in the output directory.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let synth = SynthConfig {
        slots: cfg.synth_slots,
        interval_minutes: cfg.interval_minutes,
        start: parse_datetime(&cfg.synth_start, "synth_start")?,
        base: cfg.synth_base,
        diurnal_amp: cfg.synth_diurnal,
        peak_hour: cfg.synth_peak_hour,
        weekly_amp: cfg.synth_weekly,
        peak_day: cfg.synth_peak_day,
        noise_sigma: cfg.synth_sigma,
        drivers: parse_drivers(&cfg.synth_drivers)?,
        calendar: cfg.synth_calendar,
        seed: cfg.seed,
    };
    let panel = synth_panel(&synth)?;

    let schema_path = out.join("schema.csv");
    write_schema(&panel.schema, &schema_path)?;
    announce(&schema_path);

    let panel_path = out.join("panel.csv");
    let mask_path = mask_path_for(&panel_path);
    write_panel(&panel, &panel_path, &mask_path)?;
    announce(&panel_path);
    announce(&mask_path);

    println!(
        "synthesized {} slot(s) of {} min from {} ({} feature(s), seed {})",
        panel.slots(),
        panel.grid.interval_minutes(),
        panel.grid.start().format(crate::data::TIME_FORMAT),
        panel.schema.len(),
        cfg.seed,
    );
    Ok(())
}

// --------------------------------------------------------------- ingest --

#[derive(Serialize)]
struct IngestReport {
    events_parsed: usize,
    dropped_outside_grid: usize,
    dropped_out_of_scope: usize,
    events_aggregated: usize,
    scope: String,
    slots: usize,
    interval_minutes: u32,
    grid_start: String,
    grid_end: String,
    features: usize,
    missing_before_imputation: usize,
    imputed_cells: usize,
    imputed_by_feature: BTreeMap<String, usize>,
    missing_after_imputation: usize,
}

/// Floors a timestamp onto the interval lattice anchored at that day's
/// midnight, discarding seconds.
fn floor_to_interval(t: NaiveDateTime, interval_minutes: u32) -> NaiveDateTime {
    let minute_of_day = t.hour() * 60 + t.minute();
    let floored = minute_of_day - minute_of_day % interval_minutes;
    t.date()
        .and_hms_opt(floored / 60, floored % 60, 0)
        .expect("floored minute-of-day is always a valid time")
}

/// Smallest grid (anchored to the interval lattice) covering every event.
fn grid_covering(events: &[ubernet::panel::Event], interval_minutes: u32) -> Result<TimeGrid> {
    let min = events.iter().map(|e| e.time).min().expect("non-empty");
    let max = events.iter().map(|e| e.time).max().expect("non-empty");
    let start = floor_to_interval(min, interval_minutes);
    let last = floor_to_interval(max, interval_minutes);
    let span = (last - start).num_minutes();
    debug_assert!(span >= 0);
    let slots = span as usize / interval_minutes as usize + 1;
    TimeGrid::with_slots(start, slots, interval_minutes)
}

/// Feature tables from every `*.csv` directly inside `dir`, in filename
/// order. A missing directory is treated as "no tables": the join then
/// reports exactly which schema feature has no source.
fn load_feature_tables(dir: &Path) -> Result<Vec<FeatureTable>> {
    if !dir.is_dir() {
        return Ok(vec![]);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_feature_table(p)).collect()
}

/// Builds a panel from raw event and feature files: counts events into
/// interval slots, joins the schema's features, imputes missing cells, and
/// writes `panel.csv`, `panel.mask.csv`, and `ingest_report.json`.
pub fn cmd_ingest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let schema = read_schema(Path::new(&cfg.schema))?;
    let events = read_events(Path::new(&cfg.events))?;
    if events.is_empty() {
        return Err(Error::contract(format!(
            "event file {} holds no events; cannot derive a time grid",
            cfg.events
        )));
    }
    let grid = grid_covering(&events, cfg.interval_minutes)?;
    let scope = if cfg.region.is_empty() {
        RegionScope::Global
    } else {
        RegionScope::Region(cfg.region.clone())
    };
    let agg = aggregate_counts(&events, &grid, &scope);
    let aggregated: usize = agg.counts.iter().map(|&c| c as usize).sum();
    let bare = Panel::from_counts(grid, scope, agg.counts, agg.slot_regions)?;

    let tables = load_feature_tables(Path::new(&cfg.features_dir))?;
    let joined = join_features(&bare, &tables, &schema)?;
    let missing_before = joined.missing_count();

    // Without an adjacency file every region is an isolated node, so
    // imputation uses the temporal rules only; a provided file must cover
    // every region the events mention.
    let adjacency = if cfg.adjacency.is_empty() {
        let mut adj = Adjacency::empty();
        for slot in &joined.slot_regions {
            for (region, _) in slot {
                adj.insert_node(region.clone());
            }
        }
        adj
    } else {
        read_adjacency(Path::new(&cfg.adjacency))?
    };
    let (panel, imputation) = impute_missing(&joined, &adjacency)?;
    panel.validate()?;

    let panel_path = out.join("panel.csv");
    let mask_path = mask_path_for(&panel_path);
    write_panel(&panel, &panel_path, &mask_path)?;
    announce(&panel_path);
    announce(&mask_path);

    let report = IngestReport {
        events_parsed: events.len(),
        dropped_outside_grid: agg.dropped_outside_grid,
        dropped_out_of_scope: agg.dropped_out_of_scope,
        events_aggregated: aggregated,
        scope: panel.scope.label().to_string(),
        slots: panel.slots(),
        interval_minutes: panel.grid.interval_minutes(),
        grid_start: panel.grid.start().format(crate::data::TIME_FORMAT).to_string(),
        grid_end: panel.grid.end().format(crate::data::TIME_FORMAT).to_string(),
        features: panel.schema.len(),
        missing_before_imputation: missing_before,
        imputed_cells: imputation.filled,
        imputed_by_feature: imputation.by_feature,
        missing_after_imputation: panel.missing_count(),
    };
    let report_path = write_artifact(out, "ingest_report.json", &to_pretty_json(&report)?)?;
    announce(&report_path);

    println!(
        "ingested {} event(s) into {} slot(s); dropped {} outside grid, {} out of scope; imputed {} cell(s)",
        report.events_parsed,
        report.slots,
        report.dropped_outside_grid,
        report.dropped_out_of_scope,
        report.imputed_cells,
    );
    Ok(())
}

// ---------------------------------------------------------------- train --

/// Trains the network on the panel's training prefix and writes the
/// checkpoint plus `loss_history.csv`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (schema, panel) = load_panel(cfg)?;
    let trained = train_network(cfg, &panel)?;

    let loss_path = write_artifact(out, "loss_history.csv", &csv::loss_csv(&trained.report)?)?;
    announce(&loss_path);

    let ck_path = cfg.checkpoint_path();
    if let Some(parent) = ck_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let meta = CheckpointMeta {
        seed: cfg.seed,
        iterations: trained.report.iterations,
        final_loss: trained.report.final_loss,
    };
    save_checkpoint(&ck_path, &trained.net, &trained.normalizer, &schema.fingerprint(), &meta)?;
    announce(&ck_path);

    let first = trained.report.epoch_loss.first().copied().unwrap_or(f64::NAN);
    println!(
        "trained on slots 0..{} ({} update(s)): epoch loss {:.6} -> {:.6}",
        trained.train_end, trained.report.iterations, first, trained.report.final_loss,
    );
    Ok(())
}

// ----------------------------------------------------------------- eval --

/// Scores the configured feature-set combinations on the held-out tail and
/// writes `feature_sets.csv` / `feature_sets.json`.
pub fn cmd_eval(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (_, panel) = load_panel(cfg)?;
    let train_end = resolve_train_end(cfg, &panel)?;
    let settings = harness_settings(cfg, train_end)?;
    let sets = parse_sets(&cfg.sets)?;
    let reports = evaluate_feature_sets(&panel, &sets, &settings)?;

    let csv_path = write_artifact(out, "feature_sets.csv", &csv::eval_reports_csv(&reports)?)?;
    announce(&csv_path);
    let json_path = write_artifact(out, "feature_sets.json", &to_pretty_json(&reports)?)?;
    announce(&json_path);

    for r in &reports {
        println!("set {:>4}: rmse {:.4}  smape {:.4}  (n={})", r.slice, r.rmse, r.smape, r.n);
    }
    Ok(())
}

// ------------------------------------------------------------------- cv --

/// Rolling-origin cross-validation of the configured model; writes
/// `cv.csv`, `residuals.csv`, and `cv.json`.
pub fn cmd_cv(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (_, panel) = load_panel(cfg)?;
    let plan = make_fold_plan(&panel.grid, cfg.folds, cfg.min_train_fraction)?;
    let factory = forecaster_factory(cfg, &panel)?;
    let report = rolling_cv(&panel, factory, &plan, cfg.seed)?;

    let cv_path = write_artifact(out, "cv.csv", &csv::cv_csv(&report)?)?;
    announce(&cv_path);
    let res_path = write_artifact(out, "residuals.csv", &csv::residuals_csv(&report.residuals)?)?;
    announce(&res_path);
    let json_path = write_artifact(out, "cv.json", &to_pretty_json(&report)?)?;
    announce(&json_path);

    match (report.pooled_rmse, report.pooled_smape) {
        (Some(rmse), Some(smape)) => println!(
            "{}: pooled rmse {:.4}  smape {:.4} over {} forecast(s) in {} fold(s)",
            report.model,
            rmse,
            smape,
            report.pooled_n,
            report.folds.len(),
        ),
        _ => println!(
            "{}: no pooled metrics ({} of {} fold(s) failed)",
            report.model,
            report.failed_folds.len(),
            report.folds.len(),
        ),
    }
    for idx in &report.failed_folds {
        if let Some(fold) = report.folds.iter().find(|f| f.fold == *idx) {
            if let Some(err) = &fold.error {
                println!("fold {idx} failed: {err}");
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------------- ablate --

/// Leave-one-feature-out retraining; writes `ablation.csv` / `ablation.json`.
pub fn cmd_ablate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (_, panel) = load_panel(cfg)?;
    let train_end = resolve_train_end(cfg, &panel)?;
    let settings = harness_settings(cfg, train_end)?;
    let report = ablate_one_by_one(&panel, &settings)?;

    let csv_path = write_artifact(out, "ablation.csv", &csv::ablation_csv(&report)?)?;
    announce(&csv_path);
    let json_path = write_artifact(out, "ablation.json", &to_pretty_json(&report)?)?;
    announce(&json_path);

    println!("baseline rmse {:.4}", report.base_rmse);
    for row in &report.rows {
        match (row.rmse, row.delta_rmse) {
            (Some(rmse), Some(delta)) => {
                println!("without {:>12}: rmse {rmse:.4}  delta {delta:+.4}", row.feature);
            }
            _ => println!(
                "without {:>12}: failed ({})",
                row.feature,
                row.error.as_deref().unwrap_or("unknown error"),
            ),
        }
    }
    Ok(())
}

// ----------------------------------------------------------- importance --

/// Permutation importance of every model input on held-out windows; writes
/// `importance.csv` / `importance.json`. Uses the configured checkpoint if
/// present, otherwise trains in-process.
pub fn cmd_importance(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (schema, panel) = load_panel(cfg)?;
    let (net, normalizer, source) = acquire_net(cfg, &schema, &panel)?;
    println!("{source}");

    let train_end = resolve_train_end(cfg, &panel)?;
    let normalized = normalizer.apply(&panel)?;
    let lookback = net.config.lookback;
    let includes_pickups = net.config.inputs.first().is_some_and(|i| i.name == "p");
    let test_start = train_end.max(lookback + 1);
    if test_start >= panel.slots() {
        return Err(Error::contract(format!(
            "no held-out windows: test rows start at slot {test_start} but the panel has {}",
            panel.slots()
        )));
    }
    let mut opts = WindowOptions::new(lookback).targets(test_start..panel.slots());
    if !includes_pickups {
        opts = opts.without_pickups();
    }
    let windows = build_windows_with(&normalized, &opts)?;
    let report = permutation_importance(&net, &windows, Some(&normalizer), cfg.seed, cfg.repeats)?;

    let csv_path = write_artifact(out, "importance.csv", &csv::importance_csv(&report)?)?;
    announce(&csv_path);
    let json_path = write_artifact(out, "importance.json", &to_pretty_json(&report)?)?;
    announce(&json_path);

    println!("base rmse {:.4} on {} window(s), {} repeat(s)", report.base_rmse, windows.windows.len(), report.repeats);
    for row in &report.rows {
        println!("{:>12}: importance {:+.4}", row.feature, row.importance);
    }
    Ok(())
}

// ------------------------------------------------------------------ pdp --

/// Partial-dependence curve for one feature over held-out windows; writes
/// `pdp_<feature>.csv` / `pdp_<feature>.json`.
pub fn cmd_pdp(cfg: &RunConfig, out: &Path) -> Result<()> {
    if cfg.feature.is_empty() {
        return Err(Error::input(
            "pdp needs a feature: set `feature` in the config or pass --feature",
        ));
    }
    let (schema, panel) = load_panel(cfg)?;
    let (net, normalizer, source) = acquire_net(cfg, &schema, &panel)?;
    println!("{source}");

    let train_end = resolve_train_end(cfg, &panel)?;
    let lookback = net.config.lookback;
    let test_start = train_end.max(lookback + 1);
    let curve = partial_dependence(
        &net,
        &panel,
        &normalizer,
        test_start..panel.slots(),
        &cfg.feature,
        cfg.grid_points,
    )?;

    let csv_name = format!("pdp_{}.csv", cfg.feature);
    let csv_path = write_artifact(out, &csv_name, &csv::pdp_csv(&curve)?)?;
    announce(&csv_path);
    let json_name = format!("pdp_{}.json", cfg.feature);
    let json_path = write_artifact(out, &json_name, &to_pretty_json(&curve)?)?;
    announce(&json_path);

    let lo = curve.points.first().map(|p| p.mean_prediction).unwrap_or(f64::NAN);
    let hi = curve.points.last().map(|p| p.mean_prediction).unwrap_or(f64::NAN);
    println!(
        "pdp for {} over {} point(s): mean prediction {:.4} at low end, {:.4} at high end",
        curve.feature,
        curve.points.len(),
        lo,
        hi,
    );
    Ok(())
}

// ------------------------------------------------------------ breakdown --

/// Cross-validates the configured model, then slices its residuals by hour
/// or region; writes `breakdown_<key>.csv` / `breakdown_<key>.json`.
pub fn cmd_breakdown(cfg: &RunConfig, out: &Path) -> Result<()> {
    let key = BreakdownKey::parse(&cfg.by)?;
    let (_, panel) = load_panel(cfg)?;
    let plan = make_fold_plan(&panel.grid, cfg.folds, cfg.min_train_fraction)?;
    let factory = forecaster_factory(cfg, &panel)?;
    let cv = rolling_cv(&panel, factory, &plan, cfg.seed)?;
    let report = error_breakdown(&cv.residuals, key)?;

    let csv_name = format!("breakdown_{}.csv", key.label());
    let csv_path = write_artifact(out, &csv_name, &csv::breakdown_csv(&report)?)?;
    announce(&csv_path);
    let json_name = format!("breakdown_{}.json", key.label());
    let json_path = write_artifact(out, &json_name, &to_pretty_json(&report)?)?;
    announce(&json_path);

    for slice in &report.slices {
        println!(
            "{} {:>6}: rmse {:.4}  smape {:.4}  (n={})",
            key.label(),
            slice.slice,
            slice.rmse,
            slice.smape,
            slice.n,
        );
    }
    if !report.omitted.is_empty() {
        println!("no forecasts for {} slice value(s)", report.omitted.len());
    }
    Ok(())
}

// ------------------------------------------------------------ gradcheck --

#[derive(Serialize)]
struct GradcheckTrial {
    trial: usize,
    seed: u64,
    coords_checked: usize,
    max_rel_err: f64,
    worst_param: String,
    pass: bool,
}

#[derive(Serialize)]
struct GradcheckArtifact {
    trials: usize,
    tolerance: f64,
    step: f64,
    subsample: usize,
    max_rel_err: f64,
    worst_trial: usize,
    worst_param: String,
    coords_checked: usize,
    pass: bool,
    results: Vec<GradcheckTrial>,
}

/// Checks analytic gradients against central finite differences on freshly
/// initialized networks over synthetic windows, one random network per
/// trial; writes `gradcheck.json` and fails (exit 1) if any coordinate
/// exceeds the tolerance.
pub fn cmd_gradcheck(cfg: &RunConfig, out: &Path) -> Result<()> {
    if cfg.gc_trials == 0 {
        return Err(Error::input("gc_trials must be at least 1"));
    }
    let settings = net_settings(cfg)?;
    let lookback = settings.lookback;
    let mut results = Vec::with_capacity(cfg.gc_trials);
    let mut worst = (0usize, 0.0f64, String::new());
    let mut coords_total = 0usize;
    let mut all_pass = true;

    for trial in 0..cfg.gc_trials {
        let seed = derive_seed(cfg.seed, &format!("gradcheck:{trial}"));
        // A tiny panel with one smooth and one noise driver exercises every
        // input kind the network supports, calendar categoricals included.
        let synth = SynthConfig {
            slots: lookback + 4,
            interval_minutes: cfg.interval_minutes,
            drivers: vec![
                ubernet::panel::DriverSpec::smooth("g", 10.0),
                ubernet::panel::DriverSpec::noise("e"),
            ],
            calendar: true,
            seed,
            ..SynthConfig::default()
        };
        let panel = synth_panel(&synth)?;
        let normalizer = fit_normalizer(&panel, 0..panel.slots())?;
        let normalized = normalizer.apply(&panel)?;
        let mut opts = WindowOptions::new(lookback).targets(lookback + 1..panel.slots());
        if !settings.include_pickups {
            opts = opts.without_pickups();
        }
        let windows = build_windows_with(&normalized, &opts)?;

        let config = settings.to_config(&panel)?;
        let net = Network::<f64>::init(&config, derive_seed(seed, "init"))?;
        let gc_cfg = GradCheckConfig {
            tolerance: cfg.gc_tolerance,
            subsample: cfg.gc_subsample,
            step: cfg.gc_step,
            seed,
            ..GradCheckConfig::default()
        };
        let report = grad_check(&net, &windows.windows, &loss_config(cfg), &gc_cfg)?;

        coords_total += report.coords_checked;
        all_pass &= report.pass;
        if report.max_rel_err > worst.1 || trial == 0 {
            worst = (trial, report.max_rel_err, report.worst_param.clone());
        }
        results.push(GradcheckTrial {
            trial,
            seed,
            coords_checked: report.coords_checked,
            max_rel_err: report.max_rel_err,
            worst_param: report.worst_param,
            pass: report.pass,
        });
    }

    let artifact = GradcheckArtifact {
        trials: cfg.gc_trials,
        tolerance: cfg.gc_tolerance,
        step: cfg.gc_step,
        subsample: cfg.gc_subsample,
        max_rel_err: worst.1,
        worst_trial: worst.0,
        worst_param: worst.2.clone(),
        coords_checked: coords_total,
        pass: all_pass,
        results,
    };
    let path = write_artifact(out, "gradcheck.json", &to_pretty_json(&artifact)?)?;
    announce(&path);

    let verdict = if all_pass { "PASS" } else { "FAIL" };
    println!(
        "{verdict}: {} trial(s), {} coordinate(s), max relative error {:.3e} (tolerance {:.1e}) at {} in trial {}",
        artifact.trials, coords_total, worst.1, cfg.gc_tolerance, artifact.worst_param, worst.0,
    );
    if all_pass {
        Ok(())
    } else {
        Err(Error::numeric(format!(
            "gradient check failed: max relative error {:.3e} exceeds tolerance {:.1e}",
            worst.1, cfg.gc_tolerance
        )))
    }
}
