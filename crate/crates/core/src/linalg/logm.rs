use super::eig::{eig, principal_arg};
use super::{CMatrix, C64};
use crate::error::{Error, Result};

/// Eigenvector conditioning above which the diagonalisation path is
/// abandoned for inverse scaling and squaring.
const EIGEN_PATH_MAX_COND: f64 = 1e8;

/// Square roots are taken until `||X - I||_1` drops to this level.
const ISS_THRESHOLD: f64 = 0.3;

/// Gauss-Legendre nodes and weights on `[0, 1]`; the 7-point quadrature of
/// `int_0^1 X (I + s X)^{-1} ds` is the [7/7] Padé approximant of `log(I + X)`.
const GL7_NODES: [f64; 7] = [
    0.025446043828620757,
    0.12923440720030277,
    0.2970774243113014,
    0.5,
    0.7029225756886986,
    0.8707655927996972,
    0.9745539561713792,
];
const GL7_WEIGHTS: [f64; 7] = [
    0.06474248308443485,
    0.1398526957446383,
    0.19091502525255946,
    0.2089795918367347,
    0.19091502525255946,
    0.1398526957446383,
    0.06474248308443485,
];

fn principal_log(z: C64) -> C64 {
    C64::new(z.norm().ln(), principal_arg(z))
}

fn check_nonsingular(m: &CMatrix) -> Result<()> {
    m.lu().map(|_| ()).map_err(|_| {
        Error::Singular("logarithm of a singular matrix (eigenvalue 0 has no logarithm)".into())
    })
}

/// Principal matrix logarithm: `expm(L) = M`, eigenvalues of `L` with
/// imaginary part in `(-pi, pi]`.
///
/// Uses diagonalisation when the eigenvector matrix is well conditioned and
/// inverse scaling and squaring otherwise.
pub fn logm_principal(m: &CMatrix) -> Result<CMatrix> {
    check_nonsingular(m)?;
    let spectrum = eig(m)?;
    if spectrum.eigenvalues.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::Singular("logarithm of a matrix with eigenvalue 0".into()));
    }
    if spectrum.condition_estimate <= EIGEN_PATH_MAX_COND {
        log_from_spectrum(&spectrum)
    } else {
        logm_inverse_scaling_squaring(m)
    }
}

/// Diagonalisation path, `V diag(Log rho) V^{-1}`.
pub fn logm_eigen(m: &CMatrix) -> Result<CMatrix> {
    check_nonsingular(m)?;
    log_from_spectrum(&eig(m)?)
}

fn log_from_spectrum(spectrum: &super::Spectrum) -> Result<CMatrix> {
    let v = spectrum
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::Unsupported("eigenvectors unavailable".into()))?;
    let logs: Vec<C64> = spectrum.eigenvalues.iter().map(|&z| principal_log(z)).collect();
    let d = CMatrix::from_diag(&logs);
    right_divide(&(v * &d), v)
}

/// Returns `A * B^{-1}`.
fn right_divide(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let bt = transpose(b);
    let at = transpose(a);
    Ok(transpose(&bt.solve(&at)?))
}

fn transpose(m: &CMatrix) -> CMatrix {
    let n = m.dim();
    let mut out = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[(j, i)] = m[(i, j)];
        }
    }
    out
}

/// Inverse scaling and squaring: repeated principal square roots, a
/// [7/7] Padé approximant of `log(I + X)`, then rescaling by `2^s`.
pub fn logm_inverse_scaling_squaring(m: &CMatrix) -> Result<CMatrix> {
    check_nonsingular(m)?;
    let n = m.dim();
    let ident = CMatrix::identity(n);
    let mut x = m.clone();
    let mut roots = 0u32;
    while (&x - &ident).norm_1() > ISS_THRESHOLD {
        if roots >= 64 {
            return Err(Error::NoConvergence("inverse scaling: too many square roots".into()));
        }
        x = sqrtm_denman_beavers(&x)?;
        roots += 1;
    }
    let y = &x - &ident;
    let mut log = CMatrix::zeros(n);
    for (&node, &weight) in GL7_NODES.iter().zip(&GL7_WEIGHTS) {
        let denom = &ident + &y.scale_real(node);
        // Y (I + node Y)^{-1} = (I + node Y)^{-1} Y since they commute
        let term = denom.solve(&y)?;
        log = &log + &term.scale_real(weight);
    }
    Ok(log.scale_real(2f64.powi(roots as i32)))
}

/// Principal square root by the Denman-Beavers iteration.
pub fn sqrtm_denman_beavers(m: &CMatrix) -> Result<CMatrix> {
    let n = m.dim();
    let mut y = m.clone();
    let mut z = CMatrix::identity(n);
    for _ in 0..100 {
        let y_inv = y.inv()?;
        let z_inv = z.inv()?;
        let y_next = (&y + &z_inv).scale_real(0.5);
        let z_next = (&z + &y_inv).scale_real(0.5);
        let change = (&y_next - &y).norm_1();
        y = y_next;
        z = z_next;
        if change <= 1e-14 * y.norm_1() {
            return Ok(y);
        }
    }
    Err(Error::NoConvergence(
        "Denman-Beavers square root did not converge (eigenvalue on the negative real axis?)".into(),
    ))
}

/// Real logarithm of `M^2` for real nonsingular `M`: `expm(L) = M^2`.
pub fn logm_real_doubled(m: &CMatrix) -> Result<CMatrix> {
    let scale = m.max_abs().max(1.0);
    if !m.is_real(1e-12 * scale) {
        return Err(Error::Unsupported("real logarithm requested for a complex matrix".into()));
    }
    let real = CMatrix::from_real_slice(m.dim(), &m.real_part());
    let squared = &real * &real;
    let log = logm_principal(&squared)?;
    let residue = log.max_imag();
    if residue > 1e-9 * log.max_abs().max(1.0) {
        return Err(Error::Unsupported(format!(
            "principal logarithm of M^2 is not real (imaginary residue {residue:e}); \
             M has an eigenvalue pair on the imaginary axis"
        )));
    }
    Ok(CMatrix::from_real_slice(m.dim(), &log.real_part()))
}
