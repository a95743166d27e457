use std::cmp::Ordering;
use std::f64::consts::PI;

use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// Eigenvalues with multiplicity plus right eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<C64>,
    pub eigenvectors: Option<CMatrix>,
    /// 1-norm condition number of the eigenvector matrix; infinite when
    /// the computed eigenvectors are linearly dependent (defective input).
    pub condition_estimate: f64,
}

impl Spectrum {
    pub fn eigenvector(&self, j: usize) -> Option<Vec<C64>> {
        let v = self.eigenvectors.as_ref()?;
        Some((0..v.dim()).map(|i| v[(i, j)]).collect())
    }
}

/// Argument on the principal branch `(-pi, pi]`.
pub fn principal_arg(z: C64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Quantised modulus so the ordering below is a total order even for
/// conjugate pairs whose moduli differ in the last bits.
fn modulus_key(z: C64) -> i64 {
    let m = z.norm();
    if m == 0.0 {
        return i64::MIN;
    }
    let e = m.log10().floor();
    let mantissa = m / 10f64.powf(e);
    (e as i64) * 10_000_000_000 + (mantissa * 1e9).round() as i64
}

/// Orders eigenpairs by descending modulus, then ascending argument.
pub fn sort_spectrum(values: &[C64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let (za, zb) = (values[a], values[b]);
        modulus_key(zb)
            .cmp(&modulus_key(za))
            .then_with(|| principal_arg(za).partial_cmp(&principal_arg(zb)).unwrap_or(Ordering::Equal))
    });
    idx
}

/// Full eigen-decomposition. Eigenvalues come back sorted by
/// `(descending |rho|, ascending arg)`.
pub fn eig(m: &CMatrix) -> Result<Spectrum> {
    if !m.is_finite() {
        return Err(Error::Unsupported("eigenvalues of a non-finite matrix".into()));
    }
    let n = m.dim();
    let (values, vectors) = match n {
        1 => (vec![m[(0, 0)]], CMatrix::identity(1)),
        2 => eig_2x2(m),
        _ => eig_schur(m)?,
    };
    let order = sort_spectrum(&values);
    let eigenvalues: Vec<C64> = order.iter().map(|&i| values[i]).collect();
    let mut sorted = CMatrix::zeros(n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            sorted[(i, new_j)] = vectors[(i, old_j)];
        }
    }
    let condition_estimate = eigenvector_condition(&sorted);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(sorted),
        condition_estimate,
    })
}

fn eigenvector_condition(v: &CMatrix) -> f64 {
    let cond = v.cond_1();
    if cond.is_finite() && cond < 1e15 {
        cond.max(1.0)
    } else {
        f64::INFINITY
    }
}

fn normalize(v: &mut [C64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        // fix the phase so the largest component is real positive
        let big = v
            .iter()
            .copied()
            .fold(C64::new(0.0, 0.0), |acc, z| if z.norm() > acc.norm() { z } else { acc });
        let phase = big.conj() / big.norm();
        for z in v.iter_mut() {
            *z = *z * phase / norm;
        }
    }
}

fn eig_2x2(m: &CMatrix) -> (Vec<C64>, CMatrix) {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mean = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let disc = (half_diff * half_diff + b * c).sqrt();
    let (plus, minus) = (mean + disc, mean - disc);
    let det = a * d - b * c;
    // the larger root is computed directly, the other from the determinant
    let (l1, l2) = if plus.norm() >= minus.norm() { (plus, minus) } else { (minus, plus) };
    let l2 = if l1.norm() > 0.0 && (l1 - l2).norm() > 1e-8 * l1.norm() {
        det / l1
    } else {
        l2
    };
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let vec_for = |lambda: C64, fallback: usize| -> Vec<C64> {
        let v1 = [b, lambda - a];
        let v2 = [lambda - d, c];
        let n1 = v1[0].norm() + v1[1].norm();
        let n2 = v2[0].norm() + v2[1].norm();
        let mut v = if n1.max(n2) <= 1e-14 * scale {
            // lambda * I: any vector works
            let mut e = vec![C64::new(0.0, 0.0); 2];
            e[fallback] = C64::new(1.0, 0.0);
            e
        } else if n1 >= n2 {
            v1.to_vec()
        } else {
            v2.to_vec()
        };
        normalize(&mut v);
        v
    };
    let v1 = vec_for(l1, 0);
    let v2 = vec_for(l2, 1);
    let vectors = CMatrix::from_rows(&[vec![v1[0], v2[0]], vec![v1[1], v2[1]]]);
    (vec![l1, l2], vectors)
}

/// Householder reduction to upper Hessenberg form, accumulating `Q`.
fn hessenberg(m: &CMatrix) -> (CMatrix, CMatrix) {
    let n = m.dim();
    let mut h = m.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- (I - 2 v v^H) H
        for j in 0..n {
            let s: C64 = (0..v.len()).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            for i in 0..v.len() {
                h[(k + 1 + i, j)] -= v[i] * s * 2.0;
            }
        }
        // H <- H (I - 2 v v^H), Q <- Q (I - 2 v v^H)
        for target in [&mut h, &mut q] {
            for i in 0..n {
                let s: C64 = (0..v.len()).map(|l| target[(i, k + 1 + l)] * v[l]).sum();
                for l in 0..v.len() {
                    target[(i, k + 1 + l)] -= s * v[l].conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C64::new(0.0, 0.0);
        }
    }
    (h, q)
}

/// Givens rotation `[c s; -conj(s) c]` with real `c` that zeroes `b` in `(a, b)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, (b / nb).conj());
    }
    let r = na.hypot(nb);
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let mean = (a + d) * 0.5;
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let l1 = mean + disc;
    let l2 = mean - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur form by shifted QR on the Hessenberg matrix.
fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = m.dim();
    let (mut h, mut z) = hessenberg(m);
    let eps = f64::EPSILON;
    let max_iter = 100 * n * n;
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;
    while hi > 0 {
        // find the start of the unreduced block ending at hi
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let reference = if diag == 0.0 { h.norm_1() } else { diag };
            if sub <= eps * reference {
                h[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(Error::NoConvergence(format!(
                "QR iteration exceeded {max_iter} steps for n = {n}"
            )));
        }
        let mu = if since_deflation % 11 == 10 {
            // exceptional shift to break cycles
            h[(hi, hi)] + C64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        for i in lo..=hi {
            h[(i, i)] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            h[(k + 1, k)] = C64::new(0.0, 0.0);
            rotations.push((k, c, s));
        }
        for &(k, c, s) in &rotations {
            let top = (k + 2).min(hi);
            for i in 0..=top {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..n {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * c + y * s.conj();
                z[(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += mu;
        }
    }
    // clear rounding below the diagonal
    for i in 1..n {
        for j in 0..i {
            h[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((h, z))
}

fn eig_schur(m: &CMatrix) -> Result<(Vec<C64>, CMatrix)> {
    let n = m.dim();
    let (t, z) = schur(m)?;
    let values = t.diag();
    let small = f64::EPSILON * t.norm_1().max(f64::MIN_POSITIVE);
    let mut y_all = CMatrix::zeros(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let s: C64 = (j + 1..=k).map(|l| t[(j, l)] * y[l]).sum();
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = C64::new(small, 0.0);
            }
            y[j] = -s / denom;
        }
        let mut v = z.mul_vec(&y);
        normalize(&mut v);
        for i in 0..n {
            y_all[(i, k)] = v[i];
        }
    }
    Ok((values, y_all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn check_contract(m: &CMatrix, s: &Spectrum) {
        let n = m.dim();
        let det = m.det();
        let prod: C64 = s.eigenvalues.iter().product();
        assert!(
            (prod - det).norm() <= 1e-8 * det.norm().max(1.0),
            "product {prod} vs det {det}"
        );
        let norm = m.norm_fro();
        for j in 0..n {
            let v = s.eigenvector(j).unwrap();
            let mv = m.mul_vec(&v);
            let res: f64 = mv
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - s.eigenvalues[j] * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * norm * vn, "residual {res} for eigenvalue {}", s.eigenvalues[j]);
        }
    }

    #[test]
    fn rotation_generator() {
        let m = CMatrix::from_real_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let s = eig(&m).unwrap();
        // equal modulus, so ascending argument: -i first
        assert!((s.eigenvalues[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - c(0.0, 1.0)).norm() < 1e-14);
        check_contract(&m, &s);
    }

    #[test]
    fn companion_matrix_roots() {
        // z^2 - 5z + 6
        let m = CMatrix::from_real_rows(&[vec![5.0, -6.0], vec![1.0, 0.0]]);
        let s = eig(&m).unwrap();
        // substitution oracle: both roots of the polynomial
        for z in &s.eigenvalues {
            assert!((z * z - z * 5.0 + 6.0).norm() < 1e-12);
        }
        assert!((s.eigenvalues[0] - c(3.0, 0.0)).norm() < 1e-12);
        assert!((s.eigenvalues[1] - c(2.0, 0.0)).norm() < 1e-12);

        // cubic companion through the QR path: (z-1)(z-2)(z-4)
        let m = CMatrix::from_real_rows(&[vec![7.0, -14.0, 8.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let s = eig(&m).unwrap();
        for (z, want) in s.eigenvalues.iter().zip([4.0, 2.0, 1.0]) {
            assert!((z - c(want, 0.0)).norm() < 1e-10, "{z}");
        }
        check_contract(&m, &s);
    }

    #[test]
    fn jordan_block_is_flagged_defective() {
        let m = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let s = eig(&m).unwrap();
        assert!(s.condition_estimate.is_infinite());
        let m3 = CMatrix::from_real_rows(&[vec![2.0, 1.0, 0.0], vec![0.0, 2.0, 1.0], vec![0.0, 0.0, 2.0]]);
        let s3 = eig(&m3).unwrap();
        assert!(s3.condition_estimate > 1e8);
    }

    #[test]
    fn random_matrices_meet_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = 1 + trial % 8;
            let mut m = CMatrix::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = c(rng.gen_range(-2.0..2.0), if trial % 2 == 0 { 0.0 } else { rng.gen_range(-2.0..2.0) });
                }
            }
            let s = eig(&m).unwrap();
            check_contract(&m, &s);
        }
    }

    #[test]
    fn principal_arg_of_negative_real() {
        assert_eq!(principal_arg(c(-1.0, 0.0)), PI);
        assert_eq!(principal_arg(c(-1.0, -0.0)), PI);
    }
}
