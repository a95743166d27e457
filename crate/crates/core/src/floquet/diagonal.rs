use crate::error::{Error, Result};
use crate::linalg::{principal_arg, CMatrix, C64};
use crate::model::{Expr, SystemSpec};
use crate::quadrature::integrate;

const QUAD_TOL: f64 = 1e-13;

/// Quadrature-only normal form of a diagonal system, built one diagonal
/// entry at a time from scalar integrals of `a` and `b`.
#[derive(Clone, Debug)]
pub struct DiagonalForm<'a> {
    spec: &'a SystemSpec,
    /// `P` with entries `(int_0^omega a + sum_r Log eta_r) / omega`.
    pub p: CMatrix,
    /// `eta_r` per diagonal entry, `r = 1..p`.
    pub eta: Vec<Vec<f64>>,
}

struct Scalar<'e> {
    a: &'e Expr,
    b: &'e Expr,
}

impl Scalar<'_> {
    fn int_a(&self, lo: f64, hi: f64) -> Result<f64> {
        integrate(|u| self.a.eval(u), lo, hi, QUAD_TOL, QUAD_TOL)
    }

    /// `J(t, zeta) = 1 + int_zeta^t exp(int_s^zeta a) b(s) ds`.
    fn j(&self, t: f64, zeta: f64) -> Result<f64> {
        if self.b.is_zero() {
            return Ok(1.0);
        }
        let mut failure = None;
        let value = integrate(
            |s| match self.int_a(s, zeta) {
                Ok(v) => v.exp() * self.b.eval(s),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            zeta,
            t,
            QUAD_TOL,
            QUAD_TOL,
        );
        match failure {
            Some(e) => Err(e),
            None => Ok(1.0 + value?),
        }
    }
}

pub fn closed_form_diagonal(spec: &SystemSpec) -> Result<DiagonalForm<'_>> {
    if !spec.is_diagonal() {
        return Err(Error::Unsupported(
            "closed form needs diagonal A(t), B(t) and impulse matrices".into(),
        ));
    }
    let n = spec.dim();
    let grid = spec.grid();
    let omega = spec.omega();
    let mut p = CMatrix::zeros(n);
    let mut eta = Vec::with_capacity(n);
    for i in 0..n {
        let f = Scalar {
            a: spec.a().entry(i, i),
            b: spec.b().entry(i, i),
        };
        let mut etas = Vec::with_capacity(grid.count());
        let mut sum = C64::new(f.int_a(0.0, omega)?, 0.0);
        for r in 1..=grid.count() as i64 {
            let zeta = grid.arg(r - 1);
            let c = spec.impulse(r)[(i, i)].re;
            let value = (1.0 + c) * f.j(grid.time(r), zeta)? / f.j(grid.time(r - 1), zeta)?;
            sum += C64::new(value.abs().ln(), principal_arg(C64::new(value, 0.0)));
            etas.push(value);
        }
        p[(i, i)] = sum / omega;
        eta.push(etas);
    }
    Ok(DiagonalForm { spec, p, eta })
}

impl DiagonalForm<'_> {
    /// `X(t) = exp(int_0^t a) prod_{r <= k(t)} eta_r J(t, zeta_k) / J(t_k, zeta_k)`
    /// per diagonal entry, for `t >= 0`.
    pub fn x_at(&self, t: f64) -> Result<CMatrix> {
        let spec = self.spec;
        let grid = spec.grid();
        let n = spec.dim();
        let k = grid.interval_of(t);
        let (zeta, tk) = (grid.arg(k), grid.time(k));
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            let f = Scalar {
                a: spec.a().entry(i, i),
                b: spec.b().entry(i, i),
            };
            let mut value = f.int_a(0.0, t)?.exp();
            for r in 1..=k {
                let j = (r - 1).rem_euclid(grid.count() as i64) as usize;
                value *= self.eta[i][j];
            }
            value *= f.j(t, zeta)? / f.j(tk, zeta)?;
            out[(i, i)] = C64::new(value, 0.0);
        }
        Ok(out)
    }

    /// `Q(t) = X(t) exp(-P t)`.
    pub fn q_at(&self, t: f64) -> Result<CMatrix> {
        let x = self.x_at(t)?;
        let n = self.spec.dim();
        let mut q = CMatrix::zeros(n);
        for i in 0..n {
            q[(i, i)] = x[(i, i)] * (-self.p[(i, i)] * t).exp();
        }
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArgumentGrid, MatrixFunction, Tolerances};
    use std::f64::consts::PI;

    fn sin_system(c: f64) -> SystemSpec {
        SystemSpec::new(
            MatrixFunction::zero(1, 1.0),
            MatrixFunction::parse(&[vec!["sin(2*pi*t)"]], 1.0).unwrap(),
            vec![CMatrix::from_real_rows(&[vec![c - 1.0]])],
            ArgumentGrid::floor(1.0),
            Tolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn sin_example_closed_form() {
        let spec = sin_system(1.0);
        let form = closed_form_diagonal(&spec).unwrap();
        assert!(form.p.max_abs() < 1e-13);
        for t in [0.2, 0.5, 1.7] {
            let q = form.q_at(t).unwrap()[(0, 0)].re;
            let want = 1.0 + ((2.0 * PI * t.floor()).cos() - (2.0 * PI * t).cos()) / (2.0 * PI);
            assert!((q - want).abs() < 1e-12, "t = {t}");
        }
        let spec = sin_system(-0.8);
        let neg = closed_form_diagonal(&spec).unwrap();
        assert!((neg.p[(0, 0)] - C64::new(0.8f64.ln(), PI)).norm() < 1e-13);
    }

    #[test]
    fn zero_b_reduces_to_mean_of_a() {
        let spec = SystemSpec::new(
            MatrixFunction::parse(&[vec!["1 + cos(t)", "0"], vec!["0", "-2"]], 2.0 * PI).unwrap(),
            MatrixFunction::zero(2, 2.0 * PI),
            vec![CMatrix::zeros(2)],
            ArgumentGrid::floor(2.0 * PI),
            Tolerances::default(),
        )
        .unwrap();
        let form = closed_form_diagonal(&spec).unwrap();
        assert!((form.p[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((form.p[(1, 1)].re + 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_diagonal_is_rejected() {
        let spec = SystemSpec::new(
            MatrixFunction::parse(&[vec!["0", "1"], vec!["0", "0"]], 1.0).unwrap(),
            MatrixFunction::zero(2, 1.0),
            vec![CMatrix::zeros(2)],
            ArgumentGrid::floor(1.0),
            Tolerances::default(),
        )
        .unwrap();
        assert!(matches!(closed_form_diagonal(&spec), Err(Error::Unsupported(_))));
    }
}
