//! Cauchy and monodromy matrices, multipliers, stability verdicts and the
//! normal form `X(t) = Q(t) exp(P t)`.

mod cauchy;
mod diagonal;
mod exponents;
mod normal_form;
mod report;

pub use cauchy::{cauchy_matrix, monodromy, Propagator};
pub use diagonal::{closed_form_diagonal, DiagonalForm};
pub use exponents::{classify, floquet_exponents, periodic_solution_test, Multipliers, Verdict, N_MAX, UNIT_BAND};
pub use normal_form::{
    biperiodicity, floquet_p, floquet_p_real, q_factor, q_samples, verify_normal_form, NormalForm, Residual,
    ResidualReport,
};
pub use report::{analyze, analyze_with, AnalyzeOptions, FloquetReport};
