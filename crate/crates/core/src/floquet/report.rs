use serde::Serialize;

use super::cauchy::Propagator;
use super::exponents::{classify, floquet_exponents, Verdict};
use super::normal_form::{verify_normal_form, NormalForm, ResidualReport};
use crate::error::Result;
use crate::json;
use crate::linalg::{CMatrix, C64};
use crate::model::SystemSpec;
use crate::transition::{hypothesis_check, HypothesisReport};

/// Everything `analyze` learns about one system.
#[derive(Clone, Debug, Serialize)]
pub struct FloquetReport {
    pub omega: f64,
    #[serde(serialize_with = "json::cmatrix")]
    pub monodromy: CMatrix,
    #[serde(serialize_with = "json::complex_vec")]
    pub multipliers: Vec<C64>,
    pub moduli: Vec<f64>,
    pub arguments: Vec<f64>,
    #[serde(serialize_with = "json::complex_vec")]
    pub exponents: Vec<C64>,
    pub lyapunov: Vec<f64>,
    #[serde(rename = "P", serialize_with = "json::cmatrix")]
    pub p: CMatrix,
    /// Absent when `X(omega)` has no real logarithm of its square.
    #[serde(rename = "P_real", serialize_with = "json::option_cmatrix")]
    pub p_real: Option<CMatrix>,
    pub verdict: Verdict,
    pub oscillatory: bool,
    pub hypothesis: HypothesisReport,
    pub residuals: Option<ResidualReport>,
}

/// Options for [`analyze`].
#[derive(Clone, Copy, Debug)]
pub struct AnalyzeOptions {
    /// Sample count for the residual table; `0` skips verification.
    pub verify_samples: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { verify_samples: 16 }
    }
}

pub fn analyze(spec: &SystemSpec, options: AnalyzeOptions) -> Result<FloquetReport> {
    let hypothesis = hypothesis_check(spec)?;
    let prop = Propagator::new(spec)?;
    analyze_with(&prop, hypothesis, options)
}

/// Builds the report from an existing propagator.
pub fn analyze_with(prop: &Propagator<'_>, hypothesis: HypothesisReport, options: AnalyzeOptions) -> Result<FloquetReport> {
    let spec = prop.spec();
    let omega = spec.omega();
    let monodromy = prop.monodromy().clone();
    let multipliers = floquet_exponents(&monodromy, omega)?;
    let verdict = classify(&monodromy, &multipliers, spec.tolerances().alg);
    let form = NormalForm::complex(&monodromy, omega)?;
    let p_real = NormalForm::real(&monodromy, omega).ok().map(|f| f.p);
    let residuals = if options.verify_samples > 0 {
        Some(verify_normal_form(prop, &form, &multipliers, options.verify_samples)?)
    } else {
        None
    };
    Ok(FloquetReport {
        omega,
        moduli: multipliers.moduli(),
        arguments: multipliers.arguments(),
        oscillatory: multipliers.oscillatory(),
        multipliers: multipliers.multipliers,
        exponents: multipliers.exponents,
        lyapunov: multipliers.lyapunov,
        monodromy,
        p: form.p,
        p_real,
        verdict,
        hypothesis,
        residuals,
    })
}
