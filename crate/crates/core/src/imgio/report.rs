//! CSV outputs and plain-text summary tables.

use std::fmt::Write as _;
use std::io::Write;

use crate::imgio::{Landmark, Structure};
use crate::measure::{LossRecord, MeasurementReport};
use crate::metrics::{AngleSummary, EvalRecord, EvalSummary, MeanStd};

/// Three decimals, as in the printed tables.
pub fn fmt3(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.3}")
    }
}

/// Six decimals for machine-readable columns.
pub fn fmt6(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        fmt3(v)
    }
}

fn opt6(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

type CsvResult = Result<(), csv::Error>;

pub const MEASUREMENT_HEADER: [&str; 14] = [
    "scene_id",
    "status",
    "alpha",
    "beta",
    "graf_type",
    "standard_plane",
    "missing",
    "p1_x",
    "p1_y",
    "p2_x",
    "p2_y",
    "p3_x",
    "p3_y",
    "warnings",
];

/// One row per scene in input order; failed scenes carry the error in `warnings`.
pub fn write_measurements<W: Write>(
    out: W,
    rows: &[(String, Result<MeasurementReport, String>)],
) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MEASUREMENT_HEADER)?;
    for (id, row) in rows {
        match row {
            Ok(r) => {
                let missing: Vec<&str> = r.missing_structures.iter().map(|s| s.name()).collect();
                let mut rec = vec![
                    id.clone(),
                    "ok".into(),
                    fmt6(r.alpha),
                    fmt6(r.beta),
                    r.graf_type.to_string(),
                    r.standard_plane.to_string(),
                    missing.join(";"),
                ];
                for l in Landmark::ALL {
                    let p = r.landmarks_used.get(l);
                    rec.push(fmt6(p.x));
                    rec.push(fmt6(p.y));
                }
                rec.push(r.warnings.join("; "));
                w.write_record(&rec)?;
            }
            Err(e) => {
                let mut rec = vec![id.clone(), "error".into()];
                rec.extend(std::iter::repeat_n(String::new(), 11));
                rec.push(e.clone());
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_eval_records<W: Write>(out: W, records: &[EvalRecord]) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["scene_id".to_string()];
    header.extend(Structure::ALL.map(|s| format!("dsc_{}", s.name())));
    header.extend(Structure::ALL.map(|s| format!("hd_{}", s.name())));
    header.extend(Landmark::ALL.map(|l| format!("dist_{}", l.name())));
    for h in [
        "alpha_pred",
        "alpha_true",
        "alpha_error",
        "beta_pred",
        "beta_true",
        "beta_error",
        "predicted_type",
        "true_type",
    ] {
        header.push(h.into());
    }
    w.write_record(&header)?;
    for r in records {
        let mut rec = vec![r.scene_id.clone()];
        rec.extend(r.dsc.iter().map(|v| opt6(*v)));
        rec.extend(r.hd.iter().map(|v| opt6(*v)));
        rec.extend(r.landmark_dist.iter().map(|v| opt6(*v)));
        rec.extend([
            fmt6(r.alpha_pred),
            fmt6(r.alpha_true),
            fmt6(r.alpha_error),
            fmt6(r.beta_pred),
            fmt6(r.beta_true),
            fmt6(r.beta_error),
            r.predicted_type.to_string(),
            r.true_type.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Two columns: absolute error threshold and the fraction of scenes at or below it.
pub fn write_cdf<W: Write>(out: W, cdf: &[(f64, f64)]) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "fraction"])?;
    for (t, f) in cdf {
        w.write_record([fmt6(*t), fmt6(*f)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTotals {
    pub ss: f64,
    pub br: f64,
    pub landmark: f64,
    pub composite: f64,
    pub scenes: usize,
}

pub fn loss_totals(records: &[LossRecord]) -> LossTotals {
    records.iter().fold(LossTotals::default(), |t, r| LossTotals {
        ss: t.ss + r.ss,
        br: t.br + r.br,
        landmark: t.landmark + r.landmark.unwrap_or(0.0),
        composite: t.composite + r.composite,
        scenes: t.scenes + 1,
    })
}

/// Per-scene rows followed by a `TOTAL` row summing each column.
pub fn write_losses<W: Write>(
    out: W,
    rows: &[(String, Result<LossRecord, String>)],
) -> CsvResult {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scene_id", "status", "l_ss", "l_br", "l_landmark", "l_maskrcnn", "composite", "error",
    ])?;
    let mut ok = Vec::new();
    for (id, row) in rows {
        match row {
            Ok(r) => {
                w.write_record([
                    id.clone(),
                    "ok".into(),
                    fmt6(r.ss),
                    fmt6(r.br),
                    opt6(r.landmark),
                    opt6(r.maskrcnn),
                    fmt6(r.composite),
                    String::new(),
                ])?;
                ok.push(r.clone());
            }
            Err(e) => w.write_record([
                id.as_str(),
                "error",
                "",
                "",
                "",
                "",
                "",
                e.as_str(),
            ])?,
        }
    }
    let t = loss_totals(&ok);
    w.write_record([
        "TOTAL".into(),
        format!("{}", t.scenes),
        fmt6(t.ss),
        fmt6(t.br),
        fmt6(t.landmark),
        String::new(),
        fmt6(t.composite),
        String::new(),
    ])?;
    w.flush()?;
    Ok(())
}

fn cell(m: &Option<MeanStd>) -> (String, String) {
    match m {
        Some(m) => (fmt3(m.mean), format!("({})", fmt3(m.std))),
        None => ("-".into(), "-".into()),
    }
}

fn pct(v: f64) -> String {
    fmt3(100.0 * v)
}

fn angle_cell(a: &AngleSummary) -> String {
    let p = match &a.t_test {
        Some(t) if t.p < 0.01 => " (p<0.01)".to_string(),
        Some(t) => format!(" (p={})", fmt3(t.p)),
        None => String::new(),
    };
    format!("{} ({}){p}", fmt3(a.error.mean), fmt3(a.error.std))
}

/// Plain-text report: angle errors, misclassification, landmark distances,
/// DSC and HD per structure.
pub fn render_summary(s: &EvalSummary) -> String {
    let mut o = String::new();
    let std = match s.std_mode {
        crate::metrics::StdMode::Population => "population",
        crate::metrics::StdMode::Sample => "sample",
    };
    let _ = writeln!(o, "Scenes evaluated: {} (std: {std})", s.n);
    let _ = writeln!(o);

    let _ = writeln!(o, "Mean absolute difference and std of alpha and beta (deg)");
    let _ = writeln!(o, "{:<18}{:<34}{:<34}", "", "Angle alpha (std) (p-value)", "Angle beta (std) (p-value)");
    let _ = writeln!(o, "{:<18}{:<34}{:<34}", "Mean error", angle_cell(&s.alpha), angle_cell(&s.beta));
    let _ = writeln!(o, "{:<18}{:<34}{:<34}", "Success <5 (%)", pct(s.alpha.success_rate), pct(s.beta.success_rate));
    let _ = writeln!(o, "{:<18}{:<34}{:<34}", "Poor >10 (%)", pct(s.alpha.poor_rate), pct(s.beta.poor_rate));
    let r = |v: Option<f64>| v.map(fmt3).unwrap_or_else(|| "-".into());
    let _ = writeln!(o, "{:<18}{:<34}{:<34}", "Pearson r", r(s.alpha.pearson), r(s.beta.pearson));
    let _ = writeln!(o);

    let _ = writeln!(o, "Misclassification rate of the hip joint category (%)");
    let _ = writeln!(o, "{:<18}{:<12}{:<12}", "Overall errors", "FN", "FP");
    let m = &s.misclassification;
    let _ = writeln!(o, "{:<18}{:<12}{:<12}", pct(m.overall), pct(m.false_negative), pct(m.false_positive));
    let _ = writeln!(o);

    let _ = writeln!(o, "Mean (std) distance of three landmarks (px)");
    let _ = writeln!(o, "{:<18}{:<14}{:<20}{:<24}", "", "Bony Rim", "Lower Limb Point", "Midpoint of the Labrum");
    let lm = s.landmark.each_ref().map(cell);
    let _ = writeln!(o, "{:<18}{:<14}{:<20}{:<24}", "Mean", lm[0].0, lm[1].0, lm[2].0);
    let _ = writeln!(o, "{:<18}{:<14}{:<20}{:<24}", "(std)", lm[0].1, lm[1].1, lm[2].1);
    let _ = writeln!(o);

    for (title, vals) in [
        ("Dice similarity coefficient (DSC)", &s.dsc),
        ("Hausdorff distance (HD, px)", &s.hd),
    ] {
        let _ = writeln!(o, "{title}");
        let _ = writeln!(o, "{:<18}{:<14}{:<14}{:<14}{:<14}", "", "Flat Ilium", "Lower Limb", "Labrum", "CO Junction");
        let c = vals.each_ref().map(cell);
        let _ = writeln!(o, "{:<18}{:<14}{:<14}{:<14}{:<14}", "Mean", c[0].0, c[1].0, c[2].0, c[3].0);
        let _ = writeln!(o, "{:<18}{:<14}{:<14}{:<14}{:<14}", "(std)", c[0].1, c[1].1, c[2].1, c[3].1);
        let _ = writeln!(o);
    }
    o
}

/// Text summary of a loss run.
pub fn render_loss_totals(t: &LossTotals) -> String {
    format!(
        "Scenes: {}\nL_SS total: {}\nL_BR total: {}\nL_landmark total: {}\nComposite total: {}\n",
        t.scenes,
        fmt3(t.ss),
        fmt3(t.br),
        fmt3(t.landmark),
        fmt3(t.composite)
    )
}
