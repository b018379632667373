//! Synthetic panel generator with known structure.
//!
//! Pickup counts follow a closed form — base level, diurnal and weekly
//! cosine cycles, weighted exogenous drivers, and Gaussian noise — rounded
//! and clipped to non-negative integers. Driver signals are emitted as
//! panel features, so the generator produces ground truth where feature
//! relevance is known by construction.

use chrono::{Datelike, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::schema::{FeatureDef, FeatureSchema, Kind, SetTag, Spatial};
use super::{Panel, RegionScope, TimeGrid};
use crate::derive_seed;
use crate::error::{Error, Result};

/// One exogenous driver column.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverSpec {
    pub name: String,
    /// Contribution of the driver to the pickup level. Zero makes the
    /// column a pure distractor.
    pub weight: f64,
    /// A noise driver is i.i.d. standard normal; otherwise the driver is a
    /// smooth two-sine signal with seed-chosen periods and phases.
    pub noise: bool,
}

impl DriverSpec {
    pub fn smooth(name: &str, weight: f64) -> DriverSpec {
        DriverSpec {
            name: name.to_string(),
            weight,
            noise: false,
        }
    }

    pub fn noise(name: &str) -> DriverSpec {
        DriverSpec {
            name: name.to_string(),
            weight: 0.0,
            noise: true,
        }
    }
}

/// Generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub slots: usize,
    pub interval_minutes: u32,
    pub start: NaiveDateTime,
    /// Baseline pickup level.
    pub base: f64,
    /// Amplitude of the 24-hour cosine cycle.
    pub diurnal_amp: f64,
    /// Hour of day (fractional allowed) where the diurnal cycle peaks.
    pub peak_hour: f64,
    /// Amplitude of the 7-day cosine cycle.
    pub weekly_amp: f64,
    /// Day of week (0 = Monday, fractional allowed) where the weekly cycle
    /// peaks.
    pub peak_day: f64,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sigma: f64,
    pub drivers: Vec<DriverSpec>,
    /// Emit `hour` (0–23) and `day` (0–6) categorical calendar features.
    pub calendar: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            slots: 2000,
            interval_minutes: 15,
            start: NaiveDateTime::parse_from_str("2014-01-06T00:00", "%Y-%m-%dT%H:%M").unwrap(),
            base: 60.0,
            diurnal_amp: 25.0,
            peak_hour: 17.0,
            weekly_amp: 10.0,
            peak_day: 4.0,
            noise_sigma: 5.0,
            drivers: vec![],
            calendar: true,
            seed: 42,
        }
    }
}

fn hour_fraction(t: NaiveDateTime) -> f64 {
    t.hour() as f64 + t.minute() as f64 / 60.0
}

fn day_fraction(t: NaiveDateTime) -> f64 {
    t.weekday().num_days_from_monday() as f64 + hour_fraction(t) / 24.0
}

const TAU: f64 = std::f64::consts::TAU;

/// Generates a complete global panel from the closed-form process
/// `p(t) = round(max(0, base + diurnal(t) + weekly(t) + Σ wᵢ·gᵢ(t) + σ·ε))`.
/// The same seed always produces the same panel, bit for bit.
pub fn synth_panel(cfg: &SynthConfig) -> Result<Panel> {
    if cfg.slots == 0 {
        return Err(Error::contract("synthetic panel needs at least one slot"));
    }
    if cfg.interval_minutes == 0 {
        return Err(Error::range("interval must be positive"));
    }
    if !(cfg.noise_sigma.is_finite() && cfg.noise_sigma >= 0.0) {
        return Err(Error::range(format!(
            "noise sigma must be finite and non-negative, got {}",
            cfg.noise_sigma
        )));
    }
    for v in [cfg.base, cfg.diurnal_amp, cfg.weekly_amp, cfg.peak_hour, cfg.peak_day] {
        if !v.is_finite() {
            return Err(Error::range("synth config values must be finite"));
        }
    }

    let mut defs: Vec<FeatureDef> = Vec::new();
    if cfg.calendar {
        defs.push(FeatureDef::new("hour", SetTag::A, Kind::Categorical, Spatial::SpaceIndependent));
        defs.push(FeatureDef::new("day", SetTag::A, Kind::Categorical, Spatial::SpaceIndependent));
    }
    for d in &cfg.drivers {
        defs.push(FeatureDef::new(
            &d.name,
            SetTag::A,
            Kind::Continuous,
            Spatial::SpaceIndependent,
        ));
    }
    let schema = FeatureSchema::new(defs)?;

    let grid = TimeGrid::with_slots(cfg.start, cfg.slots, cfg.interval_minutes)?;

    // Driver signals, each from its own seeded stream.
    let mut driver_cols: Vec<Vec<f64>> = Vec::with_capacity(cfg.drivers.len());
    for d in &cfg.drivers {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, &format!("driver:{}", d.name)));
        let col: Vec<f64> = if d.noise {
            (0..cfg.slots)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                })
                .collect()
        } else {
            let p1 = Uniform::new(40.0f64, 200.0).unwrap().sample(&mut rng);
            let p2 = Uniform::new(200.0f64, 800.0).unwrap().sample(&mut rng);
            let phi1 = Uniform::new(0.0f64, TAU).unwrap().sample(&mut rng);
            let phi2 = Uniform::new(0.0f64, TAU).unwrap().sample(&mut rng);
            (0..cfg.slots)
                .map(|t| {
                    let t = t as f64;
                    (TAU * t / p1 + phi1).sin() + 0.5 * (TAU * t / p2 + phi2).sin()
                })
                .collect()
        };
        driver_cols.push(col);
    }

    let mut noise_rng = ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, "noise"));
    let mut pickups = Vec::with_capacity(cfg.slots);
    for t in 0..cfg.slots {
        let ts = grid.slot_start(t);
        let mut level = cfg.base;
        level += cfg.diurnal_amp * (TAU * (hour_fraction(ts) - cfg.peak_hour) / 24.0).cos();
        level += cfg.weekly_amp * (TAU * (day_fraction(ts) - cfg.peak_day) / 7.0).cos();
        for (d, col) in cfg.drivers.iter().zip(&driver_cols) {
            level += d.weight * col[t];
        }
        if cfg.noise_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            level += cfg.noise_sigma * z;
        }
        pickups.push(level.max(0.0).round());
    }

    let mut features: Vec<Vec<f64>> = Vec::with_capacity(schema.len());
    if cfg.calendar {
        features.push(
            (0..cfg.slots)
                .map(|t| grid.slot_start(t).hour() as f64)
                .collect(),
        );
        features.push(
            (0..cfg.slots)
                .map(|t| grid.slot_start(t).weekday().num_days_from_monday() as f64)
                .collect(),
        );
    }
    features.extend(driver_cols);

    let missing = vec![vec![false; cfg.slots]; schema.len()];
    let panel = Panel {
        grid,
        scope: RegionScope::Global,
        schema,
        pickups,
        features,
        missing,
        slot_regions: vec![],
        region_values: Default::default(),
    };
    panel.validate()?;
    Ok(panel)
}
