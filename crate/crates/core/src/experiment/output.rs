//! Result files: one CSV table plus `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::run::{FringeScan, HbtReport, ReplayRow, RunOutput, FRINGE_DETECTORS};
use crate::error::{Error, Result};

/// Nine significant digits, exponent form.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// `x` truncated (not rounded) to `digits` significant figures, e.g. "8.05e-2".
pub fn truncate_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits as i32 - 1 - exp);
    // Nudge past representation error before truncating.
    let t = (x * scale * (1.0 + 1e-12)).trunc() / scale;
    let mantissa = t / 10f64.powi(exp);
    format!("{mantissa:.prec$}e{exp}", prec = digits.saturating_sub(1))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Encoding(e.to_string())
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.display().to_string(), source },
        other => Error::Encoding(format!("{other:?}")),
    })?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, |v| json!(v))
}

fn fringe_table(scan: &FringeScan) -> (Vec<String>, Vec<Vec<String>>) {
    let sampled = scan.records.first().is_some_and(|r| r.counts.is_some());
    let mut header = strings(&["index", "x_nm", "volts", "phi_rad", "psi_rad"]);
    header.extend(FRINGE_DETECTORS.iter().map(|d| format!("p_{d}")));
    if sampled {
        header.extend(FRINGE_DETECTORS.iter().map(|d| format!("n_{d}")));
    }
    let rows = scan
        .records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.index.to_string(),
                fmt_float(r.x_nm),
                fmt_float(r.volts),
                fmt_float(r.phi_rad),
                fmt_float(r.psi_rad),
            ];
            row.extend(r.probabilities.iter().map(|&p| fmt_float(p)));
            if let Some(c) = r.counts {
                row.extend(c.iter().map(u64::to_string));
            }
            row
        })
        .collect();
    (header, rows)
}

fn fringe_metrics(scan: &FringeScan) -> Value {
    let mut m = json!({
        "theta_rad": scan.theta_rad,
        "qe": scan.qe,
        "lambda_bar_nm": scan.lambda_bar_nm,
        "points": scan.records.len(),
    });
    if let Some(a) = &scan.analysis {
        m["ir_period_nm"] = opt(a.ir.period_nm);
        m["uv_period_nm"] = opt(a.uv.period_nm);
        m["ir_visibility"] = opt(a.ir.visibility);
        m["uv_visibility"] = opt(a.uv.visibility);
        m["phase_offset_rad"] = opt(a.phase_offset_rad);
        m["sampled_ir_visibility"] = opt(a.sampled_ir_visibility);
        m["sampled_uv_visibility"] = opt(a.sampled_uv_visibility);
    } else if let Some(r) = scan.records.first() {
        for (d, p) in FRINGE_DETECTORS.iter().zip(r.probabilities) {
            m[format!("p_{d}")] = json!(p);
        }
        if let Some(c) = r.counts {
            for (d, n) in FRINGE_DETECTORS.iter().zip(c) {
                m[format!("n_{d}")] = json!(n);
            }
        }
    }
    m
}

fn hbt_table(r: &HbtReport) -> (Vec<String>, Vec<Vec<String>>) {
    let (a, b) = (&r.pair.0, &r.pair.1);
    let mut header = strings(&["record", "analytic_probability"]);
    if r.counts.is_some() {
        header.push("count".into());
    }
    let mut rows = vec![
        vec![a.clone(), fmt_float(r.singles_probability.0)],
        vec![b.clone(), fmt_float(r.singles_probability.1)],
        vec![format!("{a}&{b}"), fmt_float(r.joint_probability)],
    ];
    if let Some(c) = &r.counts {
        rows[0].push(c.singles[a].to_string());
        rows[1].push(c.singles[b].to_string());
        rows[2].push(c.coincidences[&format!("{a}&{b}")].to_string());
        rows.push(vec!["trials".into(), String::new(), c.n_trials.to_string()]);
    }
    (header, rows)
}

fn hbt_metrics(r: &HbtReport) -> Value {
    let mut m = json!({
        "method": r.method,
        "pair": [r.pair.0, r.pair.1],
        "phi_rad": r.phi_rad,
        "theta_rad": r.theta_rad,
        "joint_probability": r.joint_probability,
        "analytic_g2": opt(r.analytic_g2),
    });
    if let Some(g) = &r.g2 {
        m["n_trials"] = json!(g.n_trials);
        m["n_a"] = json!(g.n_a);
        m["n_b"] = json!(g.n_b);
        m["n_c"] = json!(g.n_c);
        m["g2_point"] = json!(g.point);
        m["g2_upper_bound"] = json!(g.upper_bound);
    }
    if let Some(why) = &r.g2_undefined {
        m["g2_undefined"] = json!(why);
    }
    m
}

fn table_and_metrics(output: &RunOutput) -> (&'static str, Vec<String>, Vec<Vec<String>>, Value) {
    match output {
        RunOutput::Fringes(s) => {
            let (h, r) = fringe_table(s);
            ("fringes.csv", h, r, fringe_metrics(s))
        }
        RunOutput::SingleShot(s) => {
            let (h, r) = fringe_table(s);
            ("single_shot.csv", h, r, fringe_metrics(s))
        }
        RunOutput::Hbt(r) => {
            let (h, rows) = hbt_table(r);
            ("hbt.csv", h, rows, hbt_metrics(r))
        }
        RunOutput::QeCurve(q) => {
            let header = strings(&["intensity_gw_cm2", "qe", "source"]);
            let rows = q
                .rows
                .iter()
                .map(|r| vec![fmt_float(r.intensity_gw_cm2), fmt_float(r.qe), r.source.as_str().into()])
                .collect();
            let model: Vec<_> = q.rows.iter().filter(|r| r.source == super::run::QeSource::Model).collect();
            let m = json!({
                "d2": opt(q.d2),
                "model_points": model.len(),
                "qe_max": model.iter().map(|r| r.qe).fold(0.0, f64::max),
            });
            ("qe_curve.csv", header, rows, m)
        }
        RunOutput::Ebit(e) => {
            let mut header = strings(&[
                "alpha_re",
                "alpha_im",
                "beta_re",
                "beta_im",
                "theta_h_rad",
                "theta_v_rad",
                "post_selection_probability",
                "expected_post_selection_probability",
                "fidelity",
            ]);
            let mut row = vec![
                fmt_float(e.alpha[0]),
                fmt_float(e.alpha[1]),
                fmt_float(e.beta[0]),
                fmt_float(e.beta[1]),
                fmt_float(e.theta_h_rad),
                fmt_float(e.theta_v_rad),
                fmt_float(e.post_selection_probability),
                fmt_float(e.expected_post_selection_probability),
                fmt_float(e.fidelity),
            ];
            let mut m = json!({
                "fidelity": e.fidelity,
                "post_selection_probability": e.post_selection_probability,
                "expected_post_selection_probability": e.expected_post_selection_probability,
            });
            if let Some(s) = e.sampled {
                header.extend(strings(&["n_trials", "n_post_selected"]));
                row.extend([s.n_trials.to_string(), s.n_post_selected.to_string()]);
                m["n_trials"] = json!(s.n_trials);
                m["n_post_selected"] = json!(s.n_post_selected);
            }
            ("ebit.csv", header, vec![row], m)
        }
    }
}

/// The `metrics` block of `summary.json`.
pub fn headline_metrics(output: &RunOutput) -> Value {
    table_and_metrics(output).3
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Encoding(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes the result table and `summary.json` into `dir`; returns the paths.
/// Output depends only on the config and the run, never on wall-clock time
/// or thread count.
pub fn emit_results(config: &ExperimentConfig, output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (name, header, rows, metrics) = table_and_metrics(output);
    let table = dir.join(name);
    write_csv(&table, &header, &rows)?;
    let summary = json!({
        "kind": config.kind.as_str(),
        "seed": config.seed,
        "trials": config.trials,
        "table": name,
        "config": serde_json::to_value(config).map_err(|e| Error::Encoding(e.to_string()))?,
        "metrics": metrics,
    });
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(vec![table, summary_path])
}

/// Writes `replay.csv` and `summary.json` for replayed count records.
pub fn emit_replay(rows: &[ReplayRow], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let header = strings(&[
        "label",
        "n_trials",
        "n_a",
        "n_b",
        "n_c",
        "g2_point",
        "g2_upper_bound",
        "g2_upper_bound_3sig",
        "quoted_bound",
    ]);
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let g = &r.estimate;
            vec![
                r.label.clone(),
                g.n_trials.to_string(),
                g.n_a.to_string(),
                g.n_b.to_string(),
                g.n_c.to_string(),
                fmt_float(g.point),
                fmt_float(g.upper_bound),
                truncate_sig(g.upper_bound, 3),
                r.quoted_bound.map(fmt_float).unwrap_or_default(),
            ]
        })
        .collect();
    let table = dir.join("replay.csv");
    write_csv(&table, &header, &table_rows)?;
    let summary = json!({
        "kind": "replay_counts",
        "table": "replay.csv",
        "records": serde_json::to_value(rows).map_err(|e| Error::Encoding(e.to_string()))?,
    });
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(vec![table, summary_path])
}
