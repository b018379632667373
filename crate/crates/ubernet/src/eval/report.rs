//! CSV rendering for harness outputs. Every builder returns the finished
//! file as a string; callers decide where it lands on disk.

use crate::error::{Error, Result};
use crate::eval::breakdown::BreakdownReport;
use crate::eval::cv::{CvReport, ResidualRecord};
use crate::eval::features::AblationReport;
use crate::eval::importance::ImportanceReport;
use crate::eval::pdp::PdpCurve;
use crate::eval::EvalReport;
use crate::train::FitReport;

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::format(format!("could not flush csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::format(format!("csv is not utf-8: {e}")))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Per-fold scores plus a pooled summary row (`fold` column = "pooled").
pub fn cv_csv(report: &CvReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "fold",
        "train_start",
        "train_end",
        "test_start",
        "test_end",
        "n",
        "rmse",
        "smape",
        "status",
    ])
    .map_err(|e| Error::format(e.to_string()))?;
    for fold in &report.folds {
        let status = match &fold.error {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {msg}"),
        };
        w.write_record([
            report.model.clone(),
            fold.fold.to_string(),
            fold.train_start.to_string(),
            fold.train_end.to_string(),
            fold.test_start.to_string(),
            fold.test_end.to_string(),
            fold.n.to_string(),
            opt(fold.rmse),
            opt(fold.smape),
            status,
        ])
        .map_err(|e| Error::format(e.to_string()))?;
    }
    let pooled_status = if report.failed_folds.is_empty() {
        "ok".to_string()
    } else {
        format!(
            "excludes failed folds {}",
            report
                .failed_folds
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        )
    };
    w.write_record([
        report.model.clone(),
        "pooled".to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        report.pooled_n.to_string(),
        opt(report.pooled_rmse),
        opt(report.pooled_smape),
        pooled_status,
    ])
    .map_err(|e| Error::format(e.to_string()))?;
    finish(w)
}

/// Every (slot, forecast, actual) triple the harness scored.
pub fn residuals_csv(records: &[ResidualRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "fold", "slot", "time", "region", "forecast", "actual"])
        .map_err(|e| Error::format(e.to_string()))?;
    for rec in records {
        w.write_record([
            rec.model.clone(),
            rec.fold.to_string(),
            rec.slot.to_string(),
            rec.time.format("%Y-%m-%dT%H:%M").to_string(),
            rec.region.clone(),
            num(rec.forecast),
            num(rec.actual),
        ])
        .map_err(|e| Error::format(e.to_string()))?;
    }
    finish(w)
}

/// One row per model/slice score, e.g. from a feature-set comparison.
pub fn eval_reports_csv(reports: &[EvalReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "slice", "n", "rmse", "smape"])
        .map_err(|e| Error::format(e.to_string()))?;
    for r in reports {
        w.write_record([
            r.model.clone(),
            r.slice.clone(),
            r.n.to_string(),
            num(r.rmse),
            num(r.smape),
        ])
        .map_err(|e| Error::format(e.to_string()))?;
    }
    finish(w)
}

/// Leave-one-out rows; the first row is the full model with delta 0.
pub fn ablation_csv(report: &AblationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["removed_feature", "rmse", "smape", "delta_rmse", "status"])
        .map_err(|e| Error::format(e.to_string()))?;
    w.write_record([
        "(none)".to_string(),
        num(report.base_rmse),
        num(report.base_smape),
        num(0.0),
        "ok".to_string(),
    ])
    .map_err(|e| Error::format(e.to_string()))?;
    for row in &report.rows {
        let status = match &row.error {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {msg}"),
        };
        w.write_record([
            row.feature.clone(),
            opt(row.rmse),
            opt(row.smape),
            opt(row.delta_rmse),
            status,
        ])
        .map_err(|e| Error::format(e.to_string()))?;
    }
    finish(w)
}

/// Features ranked by permutation importance, largest first.
pub fn importance_csv(report: &ImportanceReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["feature", "importance", "base_rmse", "repeats"])
        .map_err(|e| Error::format(e.to_string()))?;
    for row in &report.rows {
        w.write_record([
            row.feature.clone(),
            num(row.importance),
            num(report.base_rmse),
            report.repeats.to_string(),
        ])
        .map_err(|e| Error::format(e.to_string()))?;
    }
    finish(w)
}

/// Grid value and mean response, one row per grid point.
pub fn pdp_csv(curve: &PdpCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([curve.feature.as_str(), "mean_prediction"])
        .map_err(|e| Error::format(e.to_string()))?;
    for p in &curve.points {
        w.write_record([num(p.value), num(p.mean_prediction)])
            .map_err(|e| Error::format(e.to_string()))?;
    }
    finish(w)
}

/// Per-group scores; omitted groups are not rows (they appear in the JSON).
pub fn breakdown_csv(report: &BreakdownReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([report.key.label(), "model", "n", "rmse", "smape"])
        .map_err(|e| Error::format(e.to_string()))?;
    for s in &report.slices {
        w.write_record([
            s.slice.clone(),
            s.model.clone(),
            s.n.to_string(),
            num(s.rmse),
            num(s.smape),
        ])
        .map_err(|e| Error::format(e.to_string()))?;
    }
    finish(w)
}

/// Mean training loss per epoch.
pub fn loss_csv(report: &FitReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss"])
        .map_err(|e| Error::format(e.to_string()))?;
    for (epoch, loss) in report.epoch_loss.iter().enumerate() {
        w.write_record([epoch.to_string(), num(*loss)])
            .map_err(|e| Error::format(e.to_string()))?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::breakdown::{error_breakdown, BreakdownKey};
    use crate::eval::cv::FoldEval;
    use crate::eval::features::AblationRow;
    use crate::eval::importance::ImportanceRow;
    use crate::eval::pdp::PdpPoint;
    use crate::panel::testutil::dt;

    #[test]
    fn cv_csv_renders_fold_rows_then_a_pooled_row() {
        let report = CvReport {
            model: "ubernet".to_string(),
            folds: vec![
                FoldEval {
                    fold: 0,
                    train_start: 0,
                    train_end: 50,
                    test_start: 50,
                    test_end: 60,
                    n: 10,
                    rmse: Some(2.5),
                    smape: Some(12.0),
                    error: None,
                },
                FoldEval {
                    fold: 1,
                    train_start: 0,
                    train_end: 60,
                    test_start: 60,
                    test_end: 70,
                    n: 0,
                    rmse: None,
                    smape: None,
                    error: Some("diverged".to_string()),
                },
            ],
            pooled_n: 10,
            pooled_rmse: Some(2.5),
            pooled_smape: Some(12.0),
            failed_folds: vec![1],
            residuals: Vec::new(),
        };
        let text = cv_csv(&report).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "model,fold,train_start,train_end,test_start,test_end,n,rmse,smape,status"
        );
        assert_eq!(lines[1], "ubernet,0,0,50,50,60,10,2.5,12,ok");
        assert_eq!(lines[2], "ubernet,1,0,60,60,70,0,,,failed: diverged");
        assert_eq!(lines[3], "ubernet,pooled,,,,,10,2.5,12,excludes failed folds 1");
    }

    #[test]
    fn residuals_csv_formats_times_to_the_minute() {
        let records = vec![ResidualRecord {
            model: "persistence".to_string(),
            fold: 2,
            slot: 77,
            time: dt("2016-03-07T13:15"),
            region: "downtown".to_string(),
            forecast: 11.25,
            actual: 13.0,
        }];
        let text = residuals_csv(&records).unwrap();
        assert_eq!(
            text,
            "model,fold,slot,time,region,forecast,actual\n\
             persistence,2,77,2016-03-07T13:15,downtown,11.25,13\n"
        );
    }

    #[test]
    fn ablation_csv_leads_with_the_full_model_and_blanks_failed_rows() {
        let report = AblationReport {
            base_rmse: 3.0,
            base_smape: 10.0,
            rows: vec![
                AblationRow {
                    feature: "g".to_string(),
                    rmse: Some(4.5),
                    smape: Some(15.0),
                    delta_rmse: Some(1.5),
                    error: None,
                },
                AblationRow {
                    feature: "h".to_string(),
                    rmse: None,
                    smape: None,
                    delta_rmse: None,
                    error: Some("boom".to_string()),
                },
            ],
        };
        let text = ablation_csv(&report).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "(none),3,10,0,ok");
        assert_eq!(lines[2], "g,4.5,15,1.5,ok");
        assert_eq!(lines[3], "h,,,,failed: boom");
    }

    #[test]
    fn importance_pdp_and_loss_render_round_trippable_rows() {
        let imp = ImportanceReport {
            base_rmse: 2.0,
            repeats: 3,
            rows: vec![
                ImportanceRow { feature: "g".to_string(), importance: 1.75 },
                ImportanceRow { feature: "p".to_string(), importance: 0.5 },
            ],
        };
        let text = importance_csv(&imp).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "g,1.75,2,3");

        let curve = PdpCurve {
            feature: "g".to_string(),
            points: vec![
                PdpPoint { value: 0.0, mean_prediction: 10.0 },
                PdpPoint { value: 2.5, mean_prediction: 12.125 },
            ],
        };
        let text = pdp_csv(&curve).unwrap();
        assert_eq!(text, "g,mean_prediction\n0,10\n2.5,12.125\n");

        let fit = FitReport {
            epoch_loss: vec![1.5, 0.75],
            iterations: 4,
            final_loss: 0.75,
        };
        assert_eq!(loss_csv(&fit).unwrap(), "epoch,loss\n0,1.5\n1,0.75\n");
    }

    #[test]
    fn breakdown_csv_uses_the_key_as_its_first_column() {
        let t = dt("2016-03-07T09:00");
        let records = vec![ResidualRecord {
            model: "ubernet".to_string(),
            fold: 0,
            slot: 4,
            time: t,
            region: "downtown".to_string(),
            forecast: 10.0,
            actual: 12.0,
        }];
        let report = error_breakdown(&records, BreakdownKey::Hour).unwrap();
        let text = breakdown_csv(&report).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "hour,model,n,rmse,smape");
        assert_eq!(lines[1], "09,ubernet,1,2,18.181818181818183");
    }

    #[test]
    fn eval_reports_csv_renders_one_row_per_slice() {
        let reports = vec![EvalReport {
            model: "ubernet".to_string(),
            slice: "A".to_string(),
            rmse: 2.0,
            smape: 9.5,
            n: 20,
        }];
        let text = eval_reports_csv(&reports).unwrap();
        assert_eq!(text, "model,slice,n,rmse,smape\nubernet,A,20,2,9.5\n");
    }
}
