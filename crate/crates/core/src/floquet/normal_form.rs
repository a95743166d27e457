use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::cauchy::Propagator;
use super::exponents::Multipliers;
use crate::error::Result;
use crate::linalg::{expm, logm_principal, logm_real_doubled, CMatrix, C64};
use crate::transition::phi_and_j;

/// `P = Log(X(omega)) / omega`.
pub fn floquet_p(monodromy: &CMatrix, omega: f64) -> Result<CMatrix> {
    Ok(logm_principal(monodromy)?.scale_real(1.0 / omega))
}

/// Real `P~ = Log(X(omega)^2) / (2 omega)`.
pub fn floquet_p_real(monodromy: &CMatrix, omega: f64) -> Result<CMatrix> {
    Ok(logm_real_doubled(monodromy)?.scale_real(0.5 / omega))
}

/// Exponent matrix of a normal form together with the period of its `Q`.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub p: CMatrix,
    /// `omega` for `P`, `2 omega` for `P~`.
    pub period: f64,
}

impl NormalForm {
    pub fn complex(monodromy: &CMatrix, omega: f64) -> Result<Self> {
        Ok(NormalForm {
            p: floquet_p(monodromy, omega)?,
            period: omega,
        })
    }

    pub fn real(monodromy: &CMatrix, omega: f64) -> Result<Self> {
        Ok(NormalForm {
            p: floquet_p_real(monodromy, omega)?,
            period: 2.0 * omega,
        })
    }
}

/// `Q(t) = X(t) expm(-P t)`.
pub fn q_factor(prop: &Propagator<'_>, p: &CMatrix, t: f64) -> Result<CMatrix> {
    Ok(&prop.at(t)? * &expm(&p.scale_real(-t)))
}

/// `Q` at many times.
pub fn q_samples(prop: &Propagator<'_>, p: &CMatrix, times: &[f64]) -> Result<Vec<CMatrix>> {
    let x = prop.at_many(times)?;
    Ok(x.iter()
        .zip(times)
        .map(|(x, &t)| x * &expm(&p.scale_real(-t)))
        .collect())
}

/// One line of the residual table.
#[derive(Clone, Debug, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Maximum residuals of the structural identities over the sample times.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub samples: usize,
    pub entries: Vec<Residual>,
    pub passed: bool,
}

impl ResidualReport {
    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.entries.iter().find(|r| r.name == name)
    }
}

pub const FACTORIZATION_TOL: f64 = 1e-6;
pub const Q_PERIODICITY_TOL: f64 = 1e-6;
pub const Q_EQUATION_TOL: f64 = 1e-5;
pub const BIPERIODICITY_TOL: f64 = 1e-7;
pub const DET_PRODUCT_TOL: f64 = 1e-8;
pub const ROUND_TRIP_TOL: f64 = 1e-8;
pub const IMPULSE_TOL: f64 = 1e-9;
pub const REDUCTION_TOL: f64 = 1e-6;
pub const MULTIPLIER_TOL: f64 = 1e-5;
pub const COEFFICIENT_PERIODICITY_TOL: f64 = 1e-9;

const FD_STEP: f64 = 1e-5;

/// Evenly spread sample times in `[0, span)`, offset off the grid.
fn sample_times(span: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|i| span * (i as f64 + 0.37) / samples as f64).collect()
}

/// Five-point central difference from values at `t-2h, t-h, t+h, t+2h`.
fn central_difference(v: &[CMatrix], h: f64) -> CMatrix {
    let num = &(&v[0] - &v[3]).scale_real(1.0) + &(&v[2] - &v[1]).scale_real(8.0);
    num.scale_real(1.0 / (12.0 * h))
}

/// Checks the factorisation `X(t + omega) = X(t) X(omega)`, periodicity of
/// `Q`, the jump relation of `Q`, the `Q` differential equation, the
/// reduction `Y' = P Y`, biperiodicity of `Phi`, `J`, `E`, the determinant
/// product and the multiplier property.
pub fn verify_normal_form(
    prop: &Propagator<'_>,
    form: &NormalForm,
    multipliers: &Multipliers,
    samples: usize,
) -> Result<ResidualReport> {
    let spec = prop.spec();
    let grid = spec.grid();
    let omega = spec.omega();
    let x_omega = prop.monodromy();
    let p = &form.p;
    let samples = samples.max(1);
    let times = sample_times(omega, samples);
    let mut entries = Vec::new();
    let mut push = |name: &str, value: f64, threshold: f64| {
        entries.push(Residual {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        })
    };

    // X(t + omega) = X(t) X(omega)
    let shifted: Vec<f64> = times.iter().map(|t| t + omega).collect();
    let x_t = prop.at_many(&times)?;
    let x_shift = prop.at_many(&shifted)?;
    let factorization = x_t
        .iter()
        .zip(&x_shift)
        .map(|(a, b)| (&(a * x_omega) - b).norm_1())
        .fold(0.0, f64::max);
    push("factorization", factorization, FACTORIZATION_TOL);

    // Q(t + T) = Q(t)
    let later: Vec<f64> = times.iter().map(|t| t + form.period).collect();
    let q_now = q_samples(prop, p, &times)?;
    let q_later = q_samples(prop, p, &later)?;
    let q_periodicity = q_now
        .iter()
        .zip(&q_later)
        .map(|(a, b)| (a - b).norm_1())
        .fold(0.0, f64::max);
    push("q_periodicity", q_periodicity, Q_PERIODICITY_TOL);

    // Q(t_k) = (I + C_k) Q(t_k^-)
    let mut impulse: f64 = 0.0;
    for k in 1..=(grid.count() as i64 * 2) {
        let tk = grid.time(k);
        let decay = expm(&p.scale_real(-tk));
        let left = &prop.left_limit(k)? * &decay;
        let right = &prop.at_breakpoint(k)? * &decay;
        let scale = right.norm_1().max(1.0);
        impulse = impulse.max((&(spec.jump(k) * &left) - &right).norm_1() / scale);
    }
    push("impulse_consistency", impulse, IMPULSE_TOL);

    // Q' = A Q - Q P + B Q(gamma) e^{P (gamma - t)}
    let h = FD_STEP;
    let mut q_equation: f64 = 0.0;
    let mut reduction: f64 = 0.0;
    for &t in &times {
        let (k, zeta) = grid.gamma_at(t);
        let (lo, hi) = (grid.time(k), grid.time(k + 1));
        if t - 2.0 * h <= lo || t + 2.0 * h >= hi || (t - zeta).abs() <= 3.0 * h {
            continue;
        }
        let stencil = [t - 2.0 * h, t - h, t + h, t + 2.0 * h, t, zeta];
        let xs = prop.on_interval_many(k, &stencil)?;
        let qs: Vec<CMatrix> = xs
            .iter()
            .zip(&stencil)
            .map(|(x, &s)| x * &expm(&p.scale_real(-s)))
            .collect();
        let dq = central_difference(&qs[..4], h);
        let q = &qs[4];
        let q_gamma = &qs[5];
        let a = spec.a().eval(t);
        let b = spec.b().eval(t);
        let shift = expm(&p.scale_real(zeta - t));
        let rhs = &(&(&a * q) - &(q * p)) + &(&(&b * q_gamma) * &shift);
        let scale = (a.norm_1() * q.norm_1() + q.norm_1() * p.norm_1() + b.norm_1() * q_gamma.norm_1() * shift.norm_1())
            .max(1.0);
        q_equation = q_equation.max((&dq - &rhs).norm_1() / scale);

        // Y = Q^{-1} X solves Y' = P Y
        let ys: Vec<CMatrix> = qs[..5]
            .iter()
            .zip(&xs[..5])
            .map(|(q, x)| q.solve(x))
            .collect::<Result<_>>()?;
        let dy = central_difference(&ys[..4], h);
        let y = &ys[4];
        let scale = (p.norm_1() * y.norm_1()).max(1.0);
        reduction = reduction.max((&dy - &(p * y)).norm_1() / scale);
    }
    push("q_equation", q_equation, Q_EQUATION_TOL);
    push("reduction", reduction, REDUCTION_TOL);

    // Phi, J, E shifted by one period
    let (phi_dev, j_dev, e_dev) = biperiodicity(prop)?;
    push("biperiodicity_phi", phi_dev, BIPERIODICITY_TOL);
    push("biperiodicity_j", j_dev, BIPERIODICITY_TOL);
    push("biperiodicity_e", e_dev, BIPERIODICITY_TOL);

    // det X(omega) = prod rho_j
    let det = x_omega.det();
    let product = multipliers.multipliers.iter().fold(C64::new(1.0, 0.0), |acc, z| acc * z);
    push(
        "det_product",
        (det - product).norm() / det.norm().max(f64::MIN_POSITIVE),
        DET_PRODUCT_TOL,
    );

    // expm(T P) reproduces X(omega) or X(omega)^2
    let target = if form.period > omega * 1.5 {
        x_omega * x_omega
    } else {
        x_omega.clone()
    };
    let round_trip = (&expm(&p.scale_real(form.period)) - &target).norm_1() / target.norm_1();
    push("expm_round_trip", round_trip, ROUND_TRIP_TOL);

    // x_j(t + omega) = rho_j x_j(t) for eigenvector initial data
    let mut multiplier: f64 = 0.0;
    if let Some(vectors) = multipliers.spectrum.eigenvectors.as_ref() {
        if multipliers.spectrum.condition_estimate.is_finite() {
            for (j, &rho) in multipliers.multipliers.iter().enumerate() {
                let v: Vec<C64> = (0..vectors.dim()).map(|i| vectors[(i, j)]).collect();
                for (a, b) in x_t.iter().zip(&x_shift) {
                    let now = a.mul_vec(&v);
                    let next = b.mul_vec(&v);
                    let err: f64 = now
                        .iter()
                        .zip(&next)
                        .map(|(x, y)| (y - rho * x).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    let size = now.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                    multiplier = multiplier.max(err / size.max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    push("multiplier_property", multiplier, MULTIPLIER_TOL);

    let coefficients = spec
        .a()
        .periodicity_deviation(200, 0x5eed)
        .max(spec.b().periodicity_deviation(200, 0x5eed));
    push("coefficient_periodicity", coefficients, COEFFICIENT_PERIODICITY_TOL);

    let passed = entries.iter().all(|r| r.passed);
    Ok(ResidualReport {
        samples,
        entries,
        passed,
    })
}

/// Max deviations of `Phi(t + omega, s + omega)` from `Phi(t, s)` (and the
/// same for `J`, `E`) over seeded random pairs in one period.
pub fn biperiodicity(prop: &Propagator<'_>) -> Result<(f64, f64, f64)> {
    let spec = prop.spec();
    let omega = spec.omega();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..6 {
        let s = rng.gen_range(0.0..omega);
        let t = rng.gen_range(0.0..omega);
        let base = phi_and_j(spec, s, &[t])?.remove(0);
        let moved = phi_and_j(spec, s + omega, &[t + omega])?.remove(0);
        worst.0 = worst.0.max((&base.phi - &moved.phi).norm_1());
        worst.1 = worst.1.max((&base.j - &moved.j).norm_1());
        worst.2 = worst.2.max((&base.e() - &moved.e()).norm_1());
    }
    Ok(worst)
}
