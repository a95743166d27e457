use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{eig, principal_arg, CMatrix, Spectrum, C64};

/// Width of the band around the unit circle treated as modulus one.
pub const UNIT_BAND: f64 = 1e-8;
/// Largest `N` tried when looking for `X(omega)^N = I`.
pub const N_MAX: u32 = 64;

/// Multipliers and exponents of one monodromy matrix.
#[derive(Clone, Debug)]
pub struct Multipliers {
    pub omega: f64,
    pub spectrum: Spectrum,
    /// `rho_j`, sorted by descending modulus then ascending argument.
    pub multipliers: Vec<C64>,
    /// `lambda_j = (ln |rho_j| + i arg rho_j) / omega`.
    pub exponents: Vec<C64>,
    /// `Re lambda_j`.
    pub lyapunov: Vec<f64>,
}

impl Multipliers {
    pub fn moduli(&self) -> Vec<f64> {
        self.multipliers.iter().map(|z| z.norm()).collect()
    }

    pub fn arguments(&self) -> Vec<f64> {
        self.multipliers.iter().map(|&z| principal_arg(z)).collect()
    }

    /// Some `Im lambda_j` is nonzero (this includes negative real multipliers).
    pub fn oscillatory(&self) -> bool {
        self.multipliers.iter().any(|&z| principal_arg(z).abs() > 1e-9)
    }
}

pub fn floquet_exponents(monodromy: &CMatrix, omega: f64) -> Result<Multipliers> {
    let spectrum = eig(monodromy)?;
    let scale = monodromy.norm_1().max(f64::MIN_POSITIVE);
    if spectrum.eigenvalues.iter().any(|z| z.norm() <= 1e-14 * scale) || monodromy.det().norm() == 0.0 {
        return Err(Error::Singular(
            "monodromy matrix is singular, which contradicts invertible jumps and anchors".into(),
        ));
    }
    let multipliers = spectrum.eigenvalues.clone();
    let exponents: Vec<C64> = multipliers
        .iter()
        .map(|&z| C64::new(z.norm().ln(), principal_arg(z)) / omega)
        .collect();
    let lyapunov = exponents.iter().map(|l| l.re).collect();
    Ok(Multipliers {
        omega,
        spectrum,
        multipliers,
        exponents,
        lyapunov,
    })
}

/// Long-time behaviour of all solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    ExponentiallyStable,
    Unbounded,
    PeriodicOmega,
    PeriodicNOmega(u32),
    BoundedNonPeriodic,
    MarginalDefective,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::ExponentiallyStable => f.write_str("ExponentiallyStable"),
            Verdict::Unbounded => f.write_str("Unbounded"),
            Verdict::PeriodicOmega => f.write_str("PeriodicOmega"),
            Verdict::PeriodicNOmega(n) => write!(f, "PeriodicNOmega({n})"),
            Verdict::BoundedNonPeriodic => f.write_str("BoundedNonPeriodic"),
            Verdict::MarginalDefective => f.write_str("MarginalDefective"),
        }
    }
}

impl serde::Serialize for Verdict {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Tolerance for `||X^N - I||`, growing linearly with `N` to absorb
/// accumulated rounding in the powers.
fn power_tolerance(alg: f64, n: u32) -> f64 {
    alg.max(1e-8) * n as f64
}

/// Smallest `N <= n_max` with `||X(omega)^N - I||_1 <= tol`.
pub fn periodic_solution_test(monodromy: &CMatrix, n_max: u32, alg: f64) -> Option<u32> {
    let ident = CMatrix::identity(monodromy.dim());
    let mut power = ident.clone();
    for n in 1..=n_max {
        power = &power * monodromy;
        if (&power - &ident).norm_1() <= power_tolerance(alg, n) {
            return Some(n);
        }
        if !power.is_finite() {
            return None;
        }
    }
    None
}

/// Stability verdict from the multipliers.
pub fn classify(monodromy: &CMatrix, multipliers: &Multipliers, alg: f64) -> Verdict {
    let moduli = multipliers.moduli();
    if moduli.iter().all(|&m| m < 1.0 - UNIT_BAND) {
        return Verdict::ExponentiallyStable;
    }
    if moduli.iter().any(|&m| m > 1.0 + UNIT_BAND) {
        return Verdict::Unbounded;
    }
    match periodic_solution_test(monodromy, N_MAX, alg) {
        Some(1) => return Verdict::PeriodicOmega,
        Some(n) => return Verdict::PeriodicNOmega(n),
        None => {}
    }
    if unit_multipliers_semisimple(multipliers) {
        Verdict::BoundedNonPeriodic
    } else {
        log::warn!("defective multiplier on the unit circle: solutions may grow polynomially");
        Verdict::MarginalDefective
    }
}

/// Eigenvectors belonging to each cluster of unit-modulus multipliers are
/// linearly independent (Gram matrix bounded away from singular).
fn unit_multipliers_semisimple(m: &Multipliers) -> bool {
    let Some(vectors) = m.spectrum.eigenvectors.as_ref() else {
        return false;
    };
    let unit: Vec<usize> = (0..m.multipliers.len())
        .filter(|&j| (m.multipliers[j].norm() - 1.0).abs() <= UNIT_BAND)
        .collect();
    let mut seen = vec![false; unit.len()];
    for a in 0..unit.len() {
        if seen[a] {
            continue;
        }
        let cluster: Vec<usize> = (a..unit.len())
            .filter(|&b| (m.multipliers[unit[b]] - m.multipliers[unit[a]]).norm() <= 1e-6)
            .collect();
        for &b in &cluster {
            seen[b] = true;
        }
        if cluster.len() < 2 {
            continue;
        }
        let cols: Vec<Vec<C64>> = cluster
            .iter()
            .map(|&b| (0..vectors.dim()).map(|i| vectors[(i, unit[b])]).collect())
            .collect();
        let size = cols.len();
        let mut gram = CMatrix::zeros(size);
        for r in 0..size {
            for c in 0..size {
                gram[(r, c)] = cols[r].iter().zip(&cols[c]).map(|(x, y)| x.conj() * y).sum();
            }
        }
        let smallest = match eig(&gram) {
            Ok(s) => s.eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min),
            Err(_) => return false,
        };
        if !(smallest > 1e-8) {
            return false;
        }
    }
    true
}
