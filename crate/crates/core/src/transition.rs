//! Continuous-time operators on one interval: the fundamental matrix `Phi`,
//! `J(t, tau) = I + int_tau^t Phi(tau, s) B(s) ds`, `E = Phi J` and the
//! within-interval transition `W(t, s) = E(t, zeta_k) E(s, zeta_k)^{-1}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::SystemSpec;
use crate::ode::{solve_at, OdeTolerance};
use crate::quadrature;

/// `Phi(t, tau)` and `J(t, tau)` at one time.
#[derive(Clone, Debug)]
pub struct PhiJ {
    pub phi: CMatrix,
    pub j: CMatrix,
}

impl PhiJ {
    /// `E(t, tau)`.
    pub fn e(&self) -> CMatrix {
        &self.phi * &self.j
    }
}

pub(crate) fn ode_tolerance(spec: &SystemSpec) -> OdeTolerance {
    let tol = spec.tolerances();
    OdeTolerance::new(tol.ode_abs, tol.ode_rel)
}

/// Splits `times` into the part at or after `tau` (ascending) and the part
/// before it (descending), integrates each branch once and restores the
/// caller's order.
fn integrate_both_ways<F>(tau: f64, times: &[f64], mut branch: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<Vec<Vec<f64>>>,
{
    let mut forward: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= tau).collect();
    let mut backward: Vec<usize> = (0..times.len()).filter(|&i| times[i] < tau).collect();
    forward.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    backward.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut out: Vec<Option<Vec<f64>>> = vec![None; times.len()];
    for order in [forward, backward] {
        if order.is_empty() {
            continue;
        }
        let ts: Vec<f64> = order.iter().map(|&i| times[i]).collect();
        for (i, state) in order.into_iter().zip(branch(&ts)?) {
            out[i] = Some(state);
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every time integrated")).collect())
}

/// `Phi(t, tau)` and `J(t, tau)` for every `t` in `times`, from one coupled
/// integration per direction: `Phi' = A Phi`, `Psi' = -Psi A`, `K' = Psi B`
/// with `Psi(tau) = I`, `K(tau) = 0`, so that `Psi(t) = Phi(tau, t)` and
/// `J = I + K`.
pub fn phi_and_j(spec: &SystemSpec, tau: f64, times: &[f64]) -> Result<Vec<PhiJ>> {
    let n = spec.dim();
    let nn = n * n;
    let with_b = !spec.b().is_zero();
    let size = if with_b { 3 * nn } else { nn };
    let mut y0 = vec![0.0; size];
    for i in 0..n {
        y0[i * n + i] = 1.0;
        if with_b {
            y0[nn + i * n + i] = 1.0;
        }
    }
    let tol = ode_tolerance(spec);
    let a_fn = spec.a();
    let b_fn = spec.b();
    let states = integrate_both_ways(tau, times, |ts| {
        let mut a = vec![0.0; nn];
        let mut b = vec![0.0; nn];
        let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
            a_fn.eval_into(s, &mut a);
            let (phi, rest) = y.split_at(nn);
            let (dphi, drest) = dy.split_at_mut(nn);
            mat_mul(n, &a, phi, dphi);
            if with_b {
                b_fn.eval_into(s, &mut b);
                let psi = &rest[..nn];
                let (dpsi, dk) = drest.split_at_mut(nn);
                mat_mul(n, psi, &a, dpsi);
                dpsi.iter_mut().for_each(|v| *v = -*v);
                mat_mul(n, psi, &b, dk);
            }
        };
        solve_at(rhs, tau, &y0, ts, tol)
    })?;
    Ok(states
        .into_iter()
        .map(|y| {
            let phi = CMatrix::from_real_slice(n, &y[..nn]);
            let j = if with_b {
                let mut j = CMatrix::from_real_slice(n, &y[2 * nn..]);
                for i in 0..n {
                    j[(i, i)] += 1.0;
                }
                j
            } else {
                CMatrix::identity(n)
            };
            PhiJ { phi, j }
        })
        .collect())
}

fn mat_mul(n: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += x[i * n + l] * y[l * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

/// `Phi(t, s)`: solution of `Z' = A(u) Z`, `Z(s) = I`.
pub fn fundamental_matrix(spec: &SystemSpec, s: f64, t: f64) -> Result<CMatrix> {
    let n = spec.dim();
    let nn = n * n;
    let mut y0 = vec![0.0; nn];
    for i in 0..n {
        y0[i * n + i] = 1.0;
    }
    let a_fn = spec.a();
    let mut a = vec![0.0; nn];
    let rhs = |u: f64, y: &[f64], dy: &mut [f64]| {
        a_fn.eval_into(u, &mut a);
        mat_mul(n, &a, y, dy);
    };
    let y = solve_at(rhs, s, &y0, &[t], ode_tolerance(spec))?;
    Ok(CMatrix::from_real_slice(n, &y[0]))
}

/// `J(t, tau)`.
pub fn j_matrix(spec: &SystemSpec, tau: f64, t: f64) -> Result<CMatrix> {
    Ok(phi_and_j(spec, tau, &[t])?.remove(0).j)
}

/// `E(t, tau) = Phi(t, tau) J(t, tau)`.
pub fn e_matrix(spec: &SystemSpec, tau: f64, t: f64) -> Result<CMatrix> {
    Ok(phi_and_j(spec, tau, &[t])?.remove(0).e())
}

/// `E(t, tau)` for several `t` from a single integration per direction.
pub fn e_matrices(spec: &SystemSpec, tau: f64, times: &[f64]) -> Result<Vec<CMatrix>> {
    Ok(phi_and_j(spec, tau, times)?.iter().map(PhiJ::e).collect())
}

/// `W(t, s) = E(t, zeta_k) E(s, zeta_k)^{-1}` for `s, t` in the closed
/// interval `[t_k, t_{k+1}]`.
pub fn w_local(spec: &SystemSpec, k: i64, s: f64, t: f64) -> Result<CMatrix> {
    let zeta = spec.grid().arg(k);
    let e = e_matrices(spec, zeta, &[t, s])?;
    let inv = e[1]
        .inv()
        .map_err(|_| Error::Singular(format!("E(s, zeta_{k}) is singular at s = {s}")))?;
    Ok(&e[0] * &inv)
}

/// Cached anchor matrices of interval `k` (`0 <= k < p`).
#[derive(Clone, Debug)]
pub struct IntervalOperators {
    pub k: usize,
    pub zeta: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// `E(t_k, zeta_k)`
    pub e_start: CMatrix,
    /// `E(t_{k+1}, zeta_k)`
    pub e_end: CMatrix,
    pub e_start_inv: CMatrix,
    /// `None` when `J(t_{k+1}, zeta_k)` is singular.
    pub e_end_inv: Option<CMatrix>,
}

impl IntervalOperators {
    pub fn build(spec: &SystemSpec, k: usize) -> Result<Self> {
        let grid = spec.grid();
        let zeta = grid.arg(k as i64);
        let t_start = grid.time(k as i64);
        let t_end = grid.time(k as i64 + 1);
        let ends = phi_and_j(spec, zeta, &[t_start, t_end])?;
        let j_det = ends[0].j.det().norm();
        if !(j_det > 1e-12 * ends[0].j.norm_1().powi(spec.dim() as i32).max(1.0)) {
            return Err(Error::Singular(format!(
                "J(t_{k}, zeta_{k}) is singular (|det| = {j_det:e}); the advanced argument cannot be resolved"
            )));
        }
        let e_start = ends[0].e();
        let e_end = ends[1].e();
        let e_start_inv = e_start
            .inv()
            .map_err(|_| Error::Singular(format!("E(t_{k}, zeta_{k}) is singular")))?;
        let e_end_inv = e_end.inv().ok();
        Ok(IntervalOperators {
            k,
            zeta,
            t_start,
            t_end,
            e_start,
            e_end,
            e_start_inv,
            e_end_inv,
        })
    }

    /// One-interval step `E(t_{k+1}, zeta_k) E(t_k, zeta_k)^{-1}` (no impulse).
    pub fn transfer(&self) -> CMatrix {
        &self.e_end * &self.e_start_inv
    }
}

/// Builds the anchors of all `p` intervals in parallel.
pub fn interval_operators(spec: &SystemSpec) -> Result<Vec<IntervalOperators>> {
    (0..spec.grid().count())
        .into_par_iter()
        .map(|k| IntervalOperators::build(spec, k))
        .collect()
}

/// Smallness quantities of one interval.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisInterval {
    pub k: usize,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    /// `1 + nu^+`, bound on `|J|` over `[t_k, zeta_k]`.
    pub j_bound_plus: f64,
    /// `1 / (1 - nu^+)`, bound on `|J^{-1}|` (infinite when `nu^+ >= 1`).
    pub j_inv_bound_plus: f64,
    pub j_bound_minus: f64,
    pub j_inv_bound_minus: f64,
}

/// Integral smallness diagnostics that guarantee invertible `J` anchors.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    /// Matrix norm used for `|A(u)|`, `|B(u)|`.
    pub norm: String,
    pub intervals: Vec<HypothesisInterval>,
    pub sigma: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    pub passed: bool,
}

const HYPOTHESIS_QUAD_TOL: f64 = 1e-10;

pub fn hypothesis_check(spec: &SystemSpec) -> Result<HypothesisReport> {
    let grid = spec.grid();
    let norm_integral = |f: &crate::model::MatrixFunction, lo: f64, hi: f64| -> Result<f64> {
        if f.is_zero() {
            return Ok(0.0);
        }
        quadrature::integrate(|u| f.norm_1(u), lo, hi, HYPOTHESIS_QUAD_TOL, HYPOTHESIS_QUAD_TOL)
    };
    let bounds = |nu: f64| (1.0 + nu, if nu < 1.0 { 1.0 / (1.0 - nu) } else { f64::INFINITY });
    let mut intervals = Vec::with_capacity(grid.count());
    for k in 0..grid.count() {
        let (t0, z, t1) = (grid.time(k as i64), grid.arg(k as i64), grid.time(k as i64 + 1));
        let sigma_plus = norm_integral(spec.a(), t0, z)?.exp();
        let sigma_minus = norm_integral(spec.a(), z, t1)?.exp();
        let nu_plus = sigma_plus * norm_integral(spec.b(), t0, z)?;
        let nu_minus = sigma_minus * norm_integral(spec.b(), z, t1)?;
        let (j_bound_plus, j_inv_bound_plus) = bounds(nu_plus);
        let (j_bound_minus, j_inv_bound_minus) = bounds(nu_minus);
        intervals.push(HypothesisInterval {
            k,
            sigma_plus,
            sigma_minus,
            nu_plus,
            nu_minus,
            j_bound_plus,
            j_inv_bound_plus,
            j_bound_minus,
            j_inv_bound_minus,
        });
    }
    let sup = |f: fn(&HypothesisInterval) -> f64| intervals.iter().map(f).fold(0.0, f64::max);
    let sigma = sup(|i| i.sigma_plus.max(i.sigma_minus));
    let nu_plus = sup(|i| i.nu_plus);
    let nu_minus = sup(|i| i.nu_minus);
    let passed = nu_plus < 1.0 && nu_minus < 1.0;
    if !passed {
        log::warn!("smallness hypothesis fails: nu+ = {nu_plus:.6}, nu- = {nu_minus:.6}");
    }
    Ok(HypothesisReport {
        norm: "matrix 1-norm (max column sum)".into(),
        intervals,
        sigma,
        nu_plus,
        nu_minus,
        passed,
    })
}
