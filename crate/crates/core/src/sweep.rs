//! One-parameter sweeps over a templated system document.
//!
//! Every `${name}` in the template is replaced by the parameter value
//! before loading, so a placeholder may sit inside an expression string
//! (`"0.5*${AC} - 1"`) or stand for a bare number.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::floquet::{analyze, AnalyzeOptions, Verdict};
use crate::json::format_float;
use crate::linalg::C64;
use crate::model::load_system;

/// Inserts `value` for every `${param}`.
pub fn substitute(template: &str, param: &str, value: f64) -> Result<String> {
    let key = format!("${{{param}}}");
    if !template.contains(&key) {
        return Err(Error::Schema {
            path: "template".into(),
            message: format!("placeholder {key} does not occur"),
        });
    }
    Ok(template.replace(&key, &format!("{value:?}")))
}

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
pub fn sweep_values(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| {
                if i == steps - 1 {
                    hi
                } else {
                    lo + i as f64 * (hi - lo) / (steps - 1) as f64
                }
            })
            .collect(),
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub multipliers: Vec<C64>,
    pub lyapunov: Vec<f64>,
    pub verdict: Verdict,
    pub oscillatory: bool,
}

/// Result for one parameter value; systems that fail to load or analyse
/// keep their error message.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<SweepPoint, String>,
}

fn evaluate(template: &str, param: &str, value: f64) -> Result<SweepPoint> {
    let spec = load_system(&substitute(template, param, value)?)?;
    let report = analyze(&spec, AnalyzeOptions { verify_samples: 0 })?;
    Ok(SweepPoint {
        multipliers: report.multipliers,
        lyapunov: report.lyapunov,
        verdict: report.verdict,
        oscillatory: report.oscillatory,
    })
}

/// Analyses the template at every value, in parallel; rows keep the order
/// of `values`.
pub fn run_sweep(template: &str, param: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    // a template without the placeholder is a usage error, not a row error
    substitute(template, param, 0.0)?;
    Ok(values
        .par_iter()
        .map(|&value| SweepRow {
            value,
            outcome: evaluate(template, param, value).map_err(|e| e.to_string()),
        })
        .collect())
}

fn join_complex(v: &[C64]) -> String {
    v.iter()
        .map(|z| format!("{}{}i", format_float(z.re), signed(z.im)))
        .collect::<Vec<_>>()
        .join(";")
}

fn signed(x: f64) -> String {
    let s = format_float(x);
    if s.starts_with('-') {
        s
    } else {
        format!("+{s}")
    }
}

/// CSV: `value,multipliers,lyapunov,verdict,oscillatory,error`; list cells
/// are `;`-separated and complex numbers are written `a+bi`.
pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{param},multipliers,lyapunov,verdict,oscillatory,error\n");
    for row in rows {
        match &row.outcome {
            Ok(p) => {
                let lyap: Vec<String> = p.lyapunov.iter().map(|&x| format_float(x)).collect();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},",
                    format_float(row.value),
                    join_complex(&p.multipliers),
                    lyap.join(";"),
                    p.verdict,
                    p.oscillatory
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{},,,,,\"{}\"", format_float(row.value), e.replace('"', "'"));
            }
        }
    }
    out
}
