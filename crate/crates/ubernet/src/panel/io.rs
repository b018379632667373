//! Panel interchange files: a values CSV plus a 0/1 missing-mask sidecar.
//!
//! The interchange format carries the slot matrix only (timestamps,
//! pickups, feature values); region-level metadata stays inside the
//! process, so panels should be imputed before being written if they are
//! to be consumed for training.

use std::path::{Path, PathBuf};

use super::events::parse_datetime;
use super::schema::FeatureSchema;
use super::{Panel, RegionScope, TimeGrid};
use crate::error::{Error, Result};

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// Conventional sidecar path: `panel.csv` → `panel.mask.csv`.
pub fn mask_path_for(panel_path: &Path) -> PathBuf {
    let stem = panel_path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "panel".to_string());
    panel_path.with_file_name(format!("{stem}.mask.csv"))
}

fn header_line(panel_schema: &FeatureSchema) -> String {
    let mut h = String::from("datetime,p");
    for f in panel_schema.features() {
        h.push(',');
        h.push_str(&f.name);
    }
    h.push('\n');
    h
}

/// Writes the values CSV and its missing-mask sidecar. Values use the
/// shortest decimal spelling that parses back to the same float, so a
/// write→read cycle is lossless.
pub fn write_panel(panel: &Panel, panel_path: &Path, mask_path: &Path) -> Result<()> {
    panel.validate()?;
    let slots = panel.slots();
    let mut values = header_line(&panel.schema);
    let mut mask = header_line(&panel.schema);
    for t in 0..slots {
        let ts = panel.grid.slot_start(t).format(TIME_FORMAT).to_string();
        values.push_str(&ts);
        mask.push_str(&ts);
        values.push_str(&format!(",{}", panel.pickups[t]));
        mask.push_str(",0");
        for (fi, col) in panel.features.iter().enumerate() {
            values.push_str(&format!(",{}", col[t]));
            mask.push_str(if panel.missing[fi][t] { ",1" } else { ",0" });
        }
        values.push('\n');
        mask.push('\n');
    }
    std::fs::write(panel_path, values)?;
    std::fs::write(mask_path, mask)?;
    Ok(())
}

fn split_header(line: &str, file: &str) -> Result<Vec<String>> {
    let fields: Vec<String> = line
        .trim_end_matches('\r')
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if fields.len() < 2 || fields[0] != "datetime" || fields[1] != "p" {
        return Err(Error::schema(format!(
            "{file}: header must start with 'datetime,p', got '{line}'"
        )));
    }
    Ok(fields[2..].to_vec())
}

/// Reads a panel written by [`write_panel`] (or produced externally in the
/// same format), validating it against the declared schema. The mask
/// sidecar is optional; without one every cell counts as observed.
pub fn read_panel(
    panel_path: &Path,
    mask_path: Option<&Path>,
    schema: &FeatureSchema,
) -> Result<Panel> {
    let file = panel_path.display().to_string();
    let text = std::fs::read_to_string(panel_path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{file}: {e}"))))?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => return Err(Error::format(format!("{file}: empty panel file"))),
    };
    let columns = split_header(header, &file)?;
    let expect: Vec<&str> = schema.names();
    if columns != expect {
        return Err(Error::schema(format!(
            "{file}: panel columns [{}] do not match schema [{}]",
            columns.join(", "),
            expect.join(", ")
        )));
    }

    let n_feat = schema.len();
    let mut times = Vec::new();
    let mut pickups = Vec::new();
    let mut features: Vec<Vec<f64>> = vec![Vec::new(); n_feat];
    for (idx, raw) in lines {
        let line_no = idx as u64 + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 + n_feat {
            return Err(Error::parse(
                &file,
                line_no,
                format!("expected {} fields, got {}", 2 + n_feat, parts.len()),
            ));
        }
        let ts = parse_datetime(parts[0]).ok_or_else(|| {
            Error::parse(&file, line_no, format!("unparseable timestamp '{}'", parts[0]))
        })?;
        times.push((line_no, ts));
        let p: f64 = parts[1].trim().parse().map_err(|_| {
            Error::parse(&file, line_no, format!("unparseable pickup count '{}'", parts[1]))
        })?;
        pickups.push(p);
        for (fi, cell) in parts[2..].iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(
                    &file,
                    line_no,
                    format!("column '{}': unparseable number '{cell}'", expect[fi]),
                )
            })?;
            features[fi].push(v);
        }
    }

    if times.len() < 2 {
        return Err(Error::format(format!(
            "{file}: a panel needs at least 2 rows to establish the slot interval"
        )));
    }
    let interval = (times[1].1 - times[0].1).num_minutes();
    if interval <= 0 {
        return Err(Error::parse(
            &file,
            times[1].0,
            "timestamps must be strictly ascending",
        ));
    }
    for w in times.windows(2) {
        let gap = (w[1].1 - w[0].1).num_minutes();
        if gap != interval {
            return Err(Error::parse(
                &file,
                w[1].0,
                format!("expected a {interval}-minute step, got {gap} minutes"),
            ));
        }
    }
    let grid = TimeGrid::with_slots(times[0].1, times.len(), interval as u32)?;

    // Mask sidecar: explicit path, else the conventional one if present.
    let conventional = mask_path_for(panel_path);
    let mask_file: Option<PathBuf> = match mask_path {
        Some(p) => Some(p.to_path_buf()),
        None if conventional.exists() => Some(conventional),
        None => None,
    };
    let mut missing = vec![vec![false; times.len()]; n_feat];
    if let Some(mp) = mask_file {
        let mfile = mp.display().to_string();
        let mtext = std::fs::read_to_string(&mp)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{mfile}: {e}"))))?;
        let mut mlines = mtext.lines().enumerate();
        let mheader = mlines
            .next()
            .ok_or_else(|| Error::format(format!("{mfile}: empty mask file")))?;
        let mcols = split_header(mheader.1, &mfile)?;
        if mcols != expect {
            return Err(Error::schema(format!(
                "{mfile}: mask columns do not match panel columns"
            )));
        }
        let mut row = 0usize;
        for (idx, raw) in mlines {
            let line_no = idx as u64 + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if row >= times.len() {
                return Err(Error::parse(&mfile, line_no, "mask has more rows than panel"));
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 2 + n_feat {
                return Err(Error::parse(
                    &mfile,
                    line_no,
                    format!("expected {} fields, got {}", 2 + n_feat, parts.len()),
                ));
            }
            let flag = |cell: &str, what: &str| -> Result<bool> {
                match cell.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::parse(
                        &mfile,
                        line_no,
                        format!("{what}: mask cells must be 0 or 1, got '{other}'"),
                    )),
                }
            };
            if flag(parts[1], "pickups")? {
                return Err(Error::parse(
                    &mfile,
                    line_no,
                    "the pickups column can never be missing",
                ));
            }
            for (fi, cell) in parts[2..].iter().enumerate() {
                missing[fi][row] = flag(cell, expect[fi])?;
            }
            row += 1;
        }
        if row != times.len() {
            return Err(Error::format(format!(
                "{mfile}: mask has {row} rows but panel has {}",
                times.len()
            )));
        }
    }

    let panel = Panel {
        grid,
        scope: RegionScope::Global,
        schema: schema.clone(),
        pickups,
        features,
        missing,
        slot_regions: vec![],
        region_values: Default::default(),
    };
    panel.validate()?;
    Ok(panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::synth::{DriverSpec, SynthConfig};
    use crate::panel::synth_panel;
    use crate::panel::testutil::toy_panel;

    #[test]
    fn write_read_round_trip_is_exact() {
        let cfg = SynthConfig {
            slots: 120,
            drivers: vec![DriverSpec::smooth("g", 7.0)],
            ..SynthConfig::default()
        };
        let panel = synth_panel(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let pp = dir.path().join("panel.csv");
        let mp = mask_path_for(&pp);
        write_panel(&panel, &pp, &mp).unwrap();
        let back = read_panel(&pp, Some(&mp), &panel.schema).unwrap();
        assert_eq!(back.pickups, panel.pickups);
        assert_eq!(back.features, panel.features);
        assert_eq!(back.missing, panel.missing);
        assert_eq!(back.grid, panel.grid);
    }

    #[test]
    fn mask_round_trips_missing_cells() {
        let mut panel = toy_panel(6);
        panel.missing[0][2] = true;
        panel.missing[1][5] = true;
        let dir = tempfile::tempdir().unwrap();
        let pp = dir.path().join("panel.csv");
        let mp = mask_path_for(&pp);
        write_panel(&panel, &pp, &mp).unwrap();
        let back = read_panel(&pp, Some(&mp), &panel.schema).unwrap();
        assert_eq!(back.missing, panel.missing);
        assert_eq!(back.missing_count(), 2);
    }

    #[test]
    fn missing_mask_defaults_to_all_observed() {
        let panel = toy_panel(5);
        let dir = tempfile::tempdir().unwrap();
        let pp = dir.path().join("panel.csv");
        write_panel(&panel, &pp, &dir.path().join("unused.mask.csv")).unwrap();
        std::fs::remove_file(dir.path().join("unused.mask.csv")).unwrap();
        let back = read_panel(&pp, None, &panel.schema).unwrap();
        assert!(!back.has_missing());
    }

    #[test]
    fn header_schema_mismatch_is_a_schema_error() {
        let panel = toy_panel(5);
        let dir = tempfile::tempdir().unwrap();
        let pp = dir.path().join("panel.csv");
        let mp = mask_path_for(&pp);
        write_panel(&panel, &pp, &mp).unwrap();
        let other = synth_panel(&SynthConfig {
            slots: 10,
            ..SynthConfig::default()
        })
        .unwrap();
        let err = read_panel(&pp, Some(&mp), &other.schema).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn irregular_timestamps_are_rejected_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let pp = dir.path().join("panel.csv");
        std::fs::write(
            &pp,
            "datetime,p\n2014-01-06T00:00,1\n2014-01-06T00:15,2\n2014-01-06T00:45,3\n",
        )
        .unwrap();
        let err = read_panel(&pp, None, &FeatureSchema::empty()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_numbers_name_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let pp = dir.path().join("panel.csv");
        std::fs::write(&pp, "datetime,p\n2014-01-06T00:00,1\n2014-01-06T00:15,x\n").unwrap();
        let err = read_panel(&pp, None, &FeatureSchema::empty()).unwrap_err();
        match &err {
            Error::Parse { file, line, .. } => {
                assert!(file.contains("panel.csv"));
                assert_eq!(*line, 3);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn pickups_marked_missing_in_mask_is_rejected() {
        let panel = toy_panel(4);
        let dir = tempfile::tempdir().unwrap();
        let pp = dir.path().join("panel.csv");
        let mp = mask_path_for(&pp);
        write_panel(&panel, &pp, &mp).unwrap();
        let text = std::fs::read_to_string(&mp).unwrap();
        let hacked = text.replacen(",0,0,0", ",1,0,0", 1);
        std::fs::write(&mp, hacked).unwrap();
        let err = read_panel(&pp, Some(&mp), &panel.schema).unwrap_err();
        assert!(err.to_string().contains("pickups"), "{err}");
    }
}
