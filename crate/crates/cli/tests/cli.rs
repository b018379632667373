//! End-to-end tests that drive the compiled binary exactly as a user would:
//! real processes, real files, asserted exit codes and artifact bytes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ubernet"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} exited {:?}\nstdout:\n{}\nstderr:\n{}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8(out.stdout).expect("stdout should be UTF-8")
}

fn run_err(args: &[&str], want_code: i32) -> String {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(want_code),
        "command {:?} should exit {want_code}\nstdout:\n{}\nstderr:\n{}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    String::from_utf8(out.stderr).expect("stderr should be UTF-8")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn path_str(dir: &TempDir, rel: &str) -> String {
    dir.path().join(rel).to_string_lossy().into_owned()
}

/// Synthesizes a small hourly panel with one smooth driver into `dir/<name>`.
fn synth_hourly(dir: &TempDir, name: &str, slots: usize, seed: &str) -> PathBuf {
    let out = path_str(dir, name);
    run_ok(&[
        "synth",
        "--out",
        &out,
        "--synth-slots",
        &slots.to_string(),
        "--interval-minutes",
        "60",
        "--synth-drivers",
        "g:20",
        "--seed",
        seed,
    ]);
    dir.path().join(name)
}

const SMALL_NET: &[&str] = &[
    "--lookback",
    "8",
    "--channels",
    "6",
    "--embed-width",
    "3",
    "--epochs",
    "6",
];

// ------------------------------------------------------------------ help --

#[test]
fn help_documents_every_config_key_with_its_default() {
    let text = run_ok(&["--help"]);
    let keys = [
        "--panel", "--mask", "--schema", "--out", "--checkpoint", "--events",
        "--features-dir", "--adjacency", "--region", "--interval-minutes", "--lookback",
        "--model", "--channels", "--embed-width", "--dilations", "--activation", "--head",
        "--include-pickups", "--lr", "--epochs", "--batch-size", "--l2", "--l1", "--seed",
        "--shuffle", "--divergence-threshold", "--parallel", "--split-datetime",
        "--train-fraction", "--folds", "--min-train-fraction", "--jobs", "--sets",
        "--repeats", "--grid-points", "--feature", "--by", "--period", "--p-lags",
        "--alpha", "--synth-slots", "--synth-start", "--synth-base", "--synth-diurnal",
        "--synth-peak-hour", "--synth-weekly", "--synth-peak-day", "--synth-sigma",
        "--synth-drivers", "--synth-calendar", "--gc-trials", "--gc-tolerance",
        "--gc-step", "--gc-subsample", "--config",
    ];
    for key in keys {
        assert!(text.contains(key), "--help should document {key}");
    }
    let defaults = text.matches("[default:").count();
    assert!(
        defaults >= keys.len() - 1, // --config documents "none" the same way
        "--help should state a default for every key, found {defaults}"
    );
    for cmd in ["ingest", "synth", "train", "eval", "cv", "ablate", "importance", "pdp", "breakdown", "gradcheck"] {
        assert!(text.contains(cmd), "--help should list the {cmd} command");
    }
}

// ---------------------------------------------------------------- config --

#[test]
fn unknown_config_key_exits_3_naming_file_and_line() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 4\nchannles = 9\n").unwrap();
    let stderr = run_err(&["synth", "--config", &cfg.to_string_lossy(), "--out", &path_str(&dir, "out")], 3);
    assert!(stderr.contains("run.toml"), "error should name the file: {stderr}");
    assert!(stderr.contains("line 2"), "error should name the line: {stderr}");
    assert!(stderr.contains("channles"), "error should name the bad key: {stderr}");
}

#[test]
fn flag_overrides_file_which_overrides_default() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "synth_slots = 50\nseed = 9\ninterval_minutes = 60\n").unwrap();
    let out = path_str(&dir, "out");
    run_ok(&["synth", "--config", &cfg.to_string_lossy(), "--out", &out, "--seed", "11"]);

    let echoed = read(&dir.path().join("out/effective_config.toml"));
    let table: toml::Table = echoed.parse().expect("echoed config should parse");
    assert_eq!(table["synth_slots"].as_integer(), Some(50), "file value should hold");
    assert_eq!(table["seed"].as_integer(), Some(11), "flag should beat the file");
    assert_eq!(table["epochs"].as_integer(), Some(100), "untouched keys keep defaults");
    for key in ["panel", "lookback", "channels", "lr", "gc_step", "synth_drivers", "by"] {
        assert!(table.contains_key(key), "echo should include every key, missing {key}");
    }
}

// ----------------------------------------------------------------- synth --

#[test]
fn synth_is_deterministic_and_reads_back() {
    let dir = TempDir::new().unwrap();
    let a = synth_hourly(&dir, "a", 120, "7");
    let b = synth_hourly(&dir, "b", 120, "7");
    for name in ["panel.csv", "panel.mask.csv", "schema.csv"] {
        assert_eq!(
            read(&a.join(name)),
            read(&b.join(name)),
            "{name} should be byte-identical across same-seed runs"
        );
    }
    let c = synth_hourly(&dir, "c", 120, "8");
    assert_ne!(read(&a.join("panel.csv")), read(&c.join("panel.csv")), "a different seed should change the data");

    let schema = ubernet::panel::read_schema(&a.join("schema.csv")).unwrap();
    let panel = ubernet::panel::read_panel(&a.join("panel.csv"), None, &schema).unwrap();
    assert_eq!(panel.slots(), 120);
    assert_eq!(panel.grid.interval_minutes(), 60);
    assert_eq!(schema.names(), vec!["hour", "day", "g"]);
}

// ----------------------------------------------------------------- train --

#[test]
fn train_writes_checkpoint_and_loss_history_deterministically() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 300, "3");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();

    let mut args = vec!["train", "--panel", &panel, "--schema", &schema, "--seed", "3"];
    args.extend_from_slice(SMALL_NET);
    let mut first = args.clone();
    let out1 = path_str(&dir, "t1");
    first.extend_from_slice(&["--out", &out1]);
    run_ok(&first);
    let mut second = args.clone();
    let out2 = path_str(&dir, "t2");
    second.extend_from_slice(&["--out", &out2]);
    run_ok(&second);

    let ck1 = read(&dir.path().join("t1/checkpoint.json"));
    let ck2 = read(&dir.path().join("t2/checkpoint.json"));
    assert_eq!(ck1, ck2, "same-seed checkpoints should be byte-identical");

    let loss = read(&dir.path().join("t1/loss_history.csv"));
    let lines: Vec<&str> = loss.trim_end().lines().collect();
    assert_eq!(lines[0], "epoch,loss");
    assert_eq!(lines.len(), 7, "header plus one row per epoch");
    let first_loss: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let last_loss: f64 = lines[6].split(',').nth(1).unwrap().parse().unwrap();
    assert!(
        last_loss < first_loss,
        "loss should fall on a learnable panel: {first_loss} -> {last_loss}"
    );

    let ck = ubernet::train::load_checkpoint(&dir.path().join("t1/checkpoint.json")).unwrap();
    assert_eq!(ck.meta.seed, 3);
    assert!(ck.meta.final_loss.is_finite());
}

#[test]
fn zero_learning_rate_keeps_every_epoch_loss_equal() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 150, "5");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();
    let out = path_str(&dir, "t");
    let mut args = vec!["train", "--panel", &panel, "--schema", &schema, "--out", &out, "--lr", "0"];
    args.extend_from_slice(SMALL_NET);
    run_ok(&args);

    let loss = read(&dir.path().join("t/loss_history.csv"));
    let values: Vec<&str> = loss
        .trim_end()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(values.len(), 6);
    for v in &values[1..] {
        assert_eq!(*v, values[0], "with lr=0 every epoch sees identical parameters");
    }
}

// ---------------------------------------------------------------- ingest --

#[test]
fn ingest_conserves_events_and_imputes_gaps() {
    let dir = TempDir::new().unwrap();
    let out = path_str(&dir, "out");
    run_ok(&[
        "ingest",
        "--events", &fixture("pickups.csv"),
        "--schema", &fixture("schema.csv"),
        "--features-dir", &fixture("features"),
        "--adjacency", &fixture("adjacency.csv"),
        "--out", &out,
    ]);

    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("out/ingest_report.json"))).unwrap();
    assert_eq!(report["events_parsed"], 10);
    assert_eq!(report["dropped_outside_grid"], 0);
    assert_eq!(report["dropped_out_of_scope"], 0);
    assert_eq!(report["events_aggregated"], 10, "every event should land in a slot");
    assert_eq!(report["slots"], 7, "grid should span 00:00 through 01:30 at 15 min");
    assert_eq!(report["missing_after_imputation"], 0);
    assert_eq!(report["imputed_cells"], 2, "temp misses 00:30 and 01:30");
    assert_eq!(report["imputed_by_feature"]["temp"], 2);

    let schema = ubernet::panel::read_schema(Path::new(&fixture("schema.csv"))).unwrap();
    let panel = ubernet::panel::read_panel(&dir.path().join("out/panel.csv"), None, &schema).unwrap();
    assert_eq!(panel.pickups, vec![3.0, 2.0, 0.0, 2.0, 2.0, 0.0, 1.0]);
    assert_eq!(panel.features[0], vec![5.0, 5.5, 5.5, 6.5, 7.0, 7.5, 7.5], "gaps carry the last value forward");
}

#[test]
fn ingest_region_scope_drops_out_of_scope_events() {
    let dir = TempDir::new().unwrap();
    let out = path_str(&dir, "out");
    run_ok(&[
        "ingest",
        "--events", &fixture("pickups.csv"),
        "--schema", &fixture("schema.csv"),
        "--features-dir", &fixture("features"),
        "--region", "east",
        "--out", &out,
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("out/ingest_report.json"))).unwrap();
    assert_eq!(report["events_parsed"], 10);
    assert_eq!(report["dropped_out_of_scope"], 4, "west events fall outside an east scope");
    assert_eq!(report["events_aggregated"], 6);
    assert_eq!(report["scope"], "east");
}

#[test]
fn ingest_without_a_table_for_a_schema_feature_exits_2() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("no_features");
    std::fs::create_dir(&empty).unwrap();
    let stderr = run_err(
        &[
            "ingest",
            "--events", &fixture("pickups.csv"),
            "--schema", &fixture("schema.csv"),
            "--features-dir", &empty.to_string_lossy(),
            "--out", &path_str(&dir, "out"),
        ],
        2,
    );
    assert!(stderr.contains("temp"), "error should name the missing feature: {stderr}");
}

#[test]
fn malformed_events_file_exits_3_naming_file_and_line() {
    let dir = TempDir::new().unwrap();
    let events = dir.path().join("events.csv");
    std::fs::write(&events, "datetime,region\n2014-01-06T00:05,east\nnot-a-time,east\n").unwrap();
    let stderr = run_err(
        &[
            "ingest",
            "--events", &events.to_string_lossy(),
            "--schema", &fixture("schema.csv"),
            "--features-dir", &fixture("features"),
            "--out", &path_str(&dir, "out"),
        ],
        3,
    );
    assert!(stderr.contains("events.csv"), "error should name the file: {stderr}");
    assert!(stderr.contains("line 3"), "error should name the line: {stderr}");
}

// ------------------------------------------------------------ exit codes --

#[test]
fn divergent_training_exits_4() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 150, "5");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();
    let out = path_str(&dir, "t");
    let mut args = vec!["train", "--panel", &panel, "--schema", &schema, "--out", &out, "--lr", "1e9"];
    args.extend_from_slice(SMALL_NET);
    let stderr = run_err(&args, 4);
    assert!(stderr.contains("diverged"), "stderr: {stderr}");
}

#[test]
fn checkpoint_trained_on_another_schema_exits_5() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 200, "5");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();
    let train_out = path_str(&dir, "t");
    let mut args = vec!["train", "--panel", &panel, "--schema", &schema, "--out", &train_out];
    args.extend_from_slice(SMALL_NET);
    run_ok(&args);
    let ck = dir.path().join("t/checkpoint.json").to_string_lossy().into_owned();

    // A panel with a differently named driver has a different schema
    // fingerprint, so the checkpoint must be refused.
    let other = path_str(&dir, "other");
    run_ok(&[
        "synth", "--out", &other, "--synth-slots", "200",
        "--interval-minutes", "60", "--synth-drivers", "h:20", "--seed", "5",
    ]);
    let opanel = dir.path().join("other/panel.csv").to_string_lossy().into_owned();
    let oschema = dir.path().join("other/schema.csv").to_string_lossy().into_owned();
    let stderr = run_err(
        &[
            "importance",
            "--panel", &opanel,
            "--schema", &oschema,
            "--checkpoint", &ck,
            "--lookback", "8",
            "--out", &path_str(&dir, "imp"),
        ],
        5,
    );
    assert!(stderr.contains("schema"), "stderr: {stderr}");
}

// -------------------------------------------------------------------- cv --

#[test]
fn cv_oracle_scores_zero_and_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 200, "2");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();

    let out1 = path_str(&dir, "c1");
    run_ok(&["cv", "--panel", &panel, "--schema", &schema, "--model", "oracle", "--folds", "3", "--out", &out1]);
    let cv = read(&dir.path().join("c1/cv.csv"));
    let pooled = cv
        .trim_end()
        .lines()
        .find(|l| l.contains(",pooled,"))
        .expect("cv.csv should have a pooled row");
    let fields: Vec<&str> = pooled.split(',').collect();
    assert_eq!(fields[7], "0", "oracle pooled RMSE should be exactly zero: {pooled}");
    assert_eq!(fields[8], "0", "oracle pooled SMAPE should be exactly zero: {pooled}");

    let out2 = path_str(&dir, "c2");
    run_ok(&["cv", "--panel", &panel, "--schema", &schema, "--model", "oracle", "--folds", "3", "--out", &out2]);
    for name in ["cv.csv", "residuals.csv", "cv.json"] {
        assert_eq!(
            read(&dir.path().join("c1").join(name)),
            read(&dir.path().join("c2").join(name)),
            "{name} should be byte-identical across reruns"
        );
    }
}

#[test]
fn cv_ridge_arx_writes_residuals_for_every_scored_slot() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 200, "2");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();
    let out = path_str(&dir, "c");
    run_ok(&["cv", "--panel", &panel, "--schema", &schema, "--model", "ridge_arx", "--folds", "4", "--out", &out]);

    let cv = read(&dir.path().join("c/cv.csv"));
    let pooled = cv.trim_end().lines().find(|l| l.contains(",pooled,")).unwrap();
    let pooled_n: usize = pooled.split(',').nth(6).unwrap().parse().unwrap();
    let residual_rows = read(&dir.path().join("c/residuals.csv")).trim_end().lines().count() - 1;
    assert_eq!(residual_rows, pooled_n, "one residual row per pooled forecast");
    assert_eq!(pooled_n, 100, "4 folds over the last half of 200 slots");
}

// ------------------------------------------------------------- breakdown --

#[test]
fn breakdown_by_hour_covers_every_hour_on_a_long_panel() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 240, "4");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();
    let out = path_str(&dir, "b");
    run_ok(&[
        "breakdown", "--panel", &panel, "--schema", &schema,
        "--model", "persistence", "--folds", "3", "--by", "hour", "--out", &out,
    ]);
    let text = read(&dir.path().join("b/breakdown_hour.csv"));
    let lines: Vec<&str> = text.trim_end().lines().collect();
    assert_eq!(lines[0], "hour,model,n,rmse,smape");
    assert_eq!(lines.len(), 25, "120 hourly test slots span all 24 hours");
    assert!(lines[1].starts_with("00,"), "hours should be zero-padded and sorted");
    assert!(lines[24].starts_with("23,"));
}

// ------------------------------------------------------------------- pdp --

#[test]
fn pdp_writes_one_row_per_grid_point_in_value_order() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 200, "6");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();
    let out = path_str(&dir, "p");
    let mut args = vec![
        "pdp", "--panel", &panel, "--schema", &schema,
        "--feature", "g", "--grid-points", "7", "--out", &out,
    ];
    args.extend_from_slice(SMALL_NET);
    run_ok(&args);

    let text = read(&dir.path().join("p/pdp_g.csv"));
    let lines: Vec<&str> = text.trim_end().lines().collect();
    assert_eq!(lines[0], "g,mean_prediction");
    assert_eq!(lines.len(), 8, "header plus one row per grid point");
    let values: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    for pair in values.windows(2) {
        assert!(pair[0] < pair[1], "grid values should increase: {values:?}");
    }
}

#[test]
fn pdp_without_a_feature_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let data = synth_hourly(&dir, "data", 120, "6");
    let panel = data.join("panel.csv").to_string_lossy().into_owned();
    let schema = data.join("schema.csv").to_string_lossy().into_owned();
    let stderr = run_err(
        &["pdp", "--panel", &panel, "--schema", &schema, "--out", &path_str(&dir, "p")],
        1,
    );
    assert!(stderr.contains("feature"), "stderr: {stderr}");
}

// --------------------------------------------------------------- gradcheck --

#[test]
fn gradcheck_passes_and_reports_trials() {
    let dir = TempDir::new().unwrap();
    let out = path_str(&dir, "g");
    let stdout = run_ok(&[
        "gradcheck", "--gc-trials", "3", "--lookback", "6",
        "--channels", "4", "--embed-width", "3", "--out", &out,
    ]);
    assert!(stdout.contains("PASS"), "stdout: {stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("g/gradcheck.json"))).unwrap();
    assert_eq!(report["trials"], 3);
    assert_eq!(report["pass"], true);
    assert_eq!(report["results"].as_array().unwrap().len(), 3);
    assert!(report["max_rel_err"].as_f64().unwrap() < 1e-4);
}
