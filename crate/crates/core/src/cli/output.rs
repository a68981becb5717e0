//! `series.csv` and `report.json` writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::harness::{Report, SeriesRow};

pub const SERIES_HEADER: &str = "t,I,D,U3,U4,kappa,s_bound,lambda1,slack_hamilton,slack_liyau";

/// `v` with 17 significant digits in plain decimal notation.
pub fn decimal17(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0.0000000000000000".into();
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}.0", digits, "0".repeat(point as usize - digits.len()))
    } else {
        let (a, b) = digits.split_at(point as usize);
        format!("{a}.{b}")
    };
    format!("{sign}{body}")
}

fn cell(v: Option<f64>) -> String {
    v.map(decimal17).unwrap_or_default()
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 200);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in rows {
        let cells = [
            cell(Some(r.t)),
            cell(Some(r.i)),
            cell(Some(r.d)),
            cell(Some(r.u3)),
            cell(r.u4),
            cell(Some(r.kappa)),
            cell(Some(r.s_bound)),
            cell(r.lambda1),
            cell(r.slack_hamilton),
            cell(r.slack_liyau),
        ];
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn report_json(report: &Report) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| crate::Error::Io(e.to_string()))
}

/// Writes `series.csv` and `report.json` into `dir`.
pub fn write_outputs(dir: &Path, report: &Report, rows: &[SeriesRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("series.csv"), series_csv(rows))?;
    fs::write(dir.join("report.json"), report_json(report)?)?;
    Ok(())
}
