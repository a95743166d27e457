use super::{CMatrix, C64};

/// Numerator coefficients of the [13/13] Padé approximant to `exp`.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Largest 1-norm for which the degree-13 approximant is accurate to unit
/// roundoff.
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the [13/13] Padé
/// approximant.
pub fn expm(m: &CMatrix) -> CMatrix {
    let n = m.dim();
    if n == 1 {
        return CMatrix::from_diag(&[m[(0, 0)].exp()]);
    }
    let norm = m.norm_1();
    if norm == 0.0 {
        return CMatrix::identity(n);
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let a = m.scale_real(0.5f64.powi(squarings as i32));
    let mut r = pade13(&a);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

fn pade13(a: &CMatrix) -> CMatrix {
    let n = a.dim();
    let b = PADE13;
    let ident = CMatrix::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> CMatrix {
        let mut out = a6.scale_real(c6);
        out = &out + &a4.scale_real(c4);
        out = &out + &a2.scale_real(c2);
        if c0 != 0.0 {
            out = &out + &ident.scale_real(c0);
        }
        out
    };
    let u_inner = &(&a6 * &lin(b[13], b[11], b[9], 0.0)) + &lin(b[7], b[5], b[3], b[1]);
    let u = a * &u_inner;
    let v = &(&a6 * &lin(b[12], b[10], b[8], 0.0)) + &lin(b[6], b[4], b[2], b[0]);
    let p = &v + &u;
    let q = &v - &u;
    // q is well conditioned for ||a||_1 <= theta13
    match q.solve(&p) {
        Ok(r) => r,
        Err(_) => taylor_fallback(a),
    }
}

fn taylor_fallback(a: &CMatrix) -> CMatrix {
    let n = a.dim();
    let mut term = CMatrix::identity(n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = (&term * a).scale(C64::new(1.0 / k as f64, 0.0));
        sum = &sum + &term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_gives_identity() {
        assert_eq!(expm(&CMatrix::zeros(3)), CMatrix::identity(3));
    }

    #[test]
    fn diagonal_entries_exponentiate() {
        let m = CMatrix::from_diag(&[c(2f64.ln(), 0.0), c(0.0, std::f64::consts::PI)]);
        let e = expm(&m);
        assert!((e[(0, 0)] - c(2.0, 0.0)).norm() < 1e-14);
        assert!((e[(1, 1)] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(e[(0, 1)].norm() < 1e-15 && e[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn nilpotent_series_terminates() {
        let m = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let expected = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!((&expm(&m) - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn rotation_generator_large_angle() {
        // exercises the squaring phase
        let theta = 20.0;
        let m = CMatrix::from_real_rows(&[vec![0.0, -theta], vec![theta, 0.0]]);
        let e = expm(&m);
        assert!((e[(0, 0)].re - theta.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - theta.sin()).abs() < 1e-12);
    }
}
