use std::f64::consts::PI;

use proptest::prelude::*;

use idepcag::floquet::{floquet_exponents, Propagator};
use idepcag::linalg::{eig, expm, logm_principal, CMatrix, C64};
use idepcag::model::{ArgumentGrid, MatrixFunction, SystemSpec, Tolerances};
use idepcag::simulate::solve_cauchy;
use idepcag::transition::{e_matrix, fundamental_matrix, j_matrix};

const OMEGA: f64 = 2.0 * PI;

/// 2x2 system with time-dependent coefficients, two impulses per period,
/// one retarded and one advanced anchor.
fn mixed_system() -> SystemSpec {
    let a = MatrixFunction::parse(
        &[vec!["-0.2 + 0.3*cos(t)", "1"], vec!["-1", "-0.1 + 0.2*sin(2*t)"]],
        OMEGA,
    )
    .unwrap();
    let b = MatrixFunction::parse(&[vec!["0.1*sin(t)", "0"], vec!["0.05", "0.1*cos(t)"]], OMEGA).unwrap();
    let grid = ArgumentGrid::new(OMEGA, vec![0.0, 2.5, OMEGA], vec![1.0, 5.5]).unwrap();
    let impulses = vec![
        CMatrix::from_real_rows(&[vec![0.1, 0.2], vec![0.0, -0.3]]),
        CMatrix::from_real_rows(&[vec![-0.2, 0.0], vec![0.1, 0.1]]),
    ];
    SystemSpec::new(a, b, impulses, grid, Tolerances::default()).unwrap()
}

fn constant_system(a: &[Vec<f64>], b: &[Vec<f64>], c: &[Vec<f64>], omega: f64, zeta: f64) -> SystemSpec {
    SystemSpec::new(
        MatrixFunction::constant(a, omega),
        MatrixFunction::constant(b, omega),
        vec![CMatrix::from_real_rows(c)],
        ArgumentGrid::new(omega, vec![0.0, omega], vec![zeta]).unwrap(),
        Tolerances::default(),
    )
    .unwrap()
}

fn dist(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm_1()
}

#[test]
fn fundamental_matrix_cocycle_and_liouville() {
    let spec = mixed_system();
    let (r, s, t) = (0.3, 2.9, 7.4);
    let lhs = &fundamental_matrix(&spec, s, t).unwrap() * &fundamental_matrix(&spec, r, s).unwrap();
    assert!(dist(&lhs, &fundamental_matrix(&spec, r, t).unwrap()) < 1e-8);
    // trace A = -0.3 + 0.3 cos t + 0.2 sin 2t
    let integral = |u: f64| -0.3 * u + 0.3 * u.sin() - 0.1 * (2.0 * u).cos();
    let det = fundamental_matrix(&spec, r, t).unwrap().det();
    assert!((det.re - (integral(t) - integral(r)).exp()).abs() < 1e-8);
    assert!(det.im.abs() < 1e-14);
}

#[test]
fn j_matches_closed_form_for_constant_scalars() {
    // J(t, tau) = 1 + b (1 - e^{a (tau - t)}) / a
    let (a, b) = (-0.7, 0.4);
    let spec = constant_system(&[vec![a]], &[vec![b]], &[vec![0.5]], 1.0, 0.25);
    for (tau, t) in [(0.25, 0.9), (0.25, 0.0), (1.3, 0.2), (0.0, 3.0)] {
        let want = 1.0 + b * (1.0 - (a * (tau - t)).exp()) / a;
        let got = j_matrix(&spec, tau, t).unwrap()[(0, 0)];
        assert!((got.re - want).abs() < 1e-9, "tau = {tau}, t = {t}");
        let e = e_matrix(&spec, tau, t).unwrap()[(0, 0)].re;
        assert!((e - (a * (t - tau)).exp() * want).abs() < 1e-9);
    }
}

#[test]
fn monodromy_powers_and_inverse() {
    let spec = mixed_system();
    let prop = Propagator::new(&spec).unwrap();
    let x = prop.monodromy();
    for m in [2u32, 3] {
        let direct = prop.at(m as f64 * OMEGA).unwrap();
        assert!(dist(&direct, &x.pow(m)) < 1e-8 * x.pow(m).norm_1().max(1.0));
    }
    let back = prop.at(-OMEGA).unwrap();
    assert!(dist(&(&back * x), &CMatrix::identity(2)) < 1e-9);
    for t in [0.4, 2.5, 3.3, 6.0] {
        let shifted = prop.at(t + OMEGA).unwrap();
        assert!(dist(&shifted, &(&prop.at(t).unwrap() * x)) < 1e-8);
    }
}

#[test]
fn similarity_invariance_of_multipliers() {
    let a = vec![vec![0.1, 1.0], vec![-1.0, -0.3]];
    let b = vec![vec![0.2, 0.0], vec![0.1, -0.1]];
    let c = vec![vec![-0.5, 0.1], vec![0.0, 0.2]];
    let t = CMatrix::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 1.0]]);
    let ti = t.inv().unwrap();
    let conj = |m: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let r = &(&t * &CMatrix::from_real_rows(m)) * &ti;
        r.rows().iter().map(|row| row.iter().map(|z| z.re).collect()).collect()
    };
    let original = constant_system(&a, &b, &c, 1.5, 0.6);
    let similar = constant_system(&conj(&a), &conj(&b), &conj(&c), 1.5, 0.6);
    let x = Propagator::new(&original).unwrap().monodromy().clone();
    let y = Propagator::new(&similar).unwrap().monodromy().clone();
    assert!(dist(&y, &(&(&t * &x) * &ti)) < 1e-8);
    let rx = floquet_exponents(&x, 1.5).unwrap().multipliers;
    let ry = floquet_exponents(&y, 1.5).unwrap().multipliers;
    for (p, q) in rx.iter().zip(&ry) {
        assert!((p - q).norm() < 1e-8);
    }
}

#[test]
fn simulation_is_linear() {
    let spec = mixed_system();
    let x = [C64::new(1.0, 0.0), C64::new(-0.5, 0.2)];
    let y = [C64::new(0.3, -1.0), C64::new(2.0, 0.0)];
    let alpha = C64::new(0.7, 0.4);
    let combo: Vec<C64> = x.iter().zip(&y).map(|(a, b)| alpha * a - b).collect();
    let sx = solve_cauchy(&spec, &x, 9.0, 0.5).unwrap();
    let sy = solve_cauchy(&spec, &y, 9.0, 0.5).unwrap();
    let sc = solve_cauchy(&spec, &combo, 9.0, 0.5).unwrap();
    for i in 0..sc.states.len() {
        for j in 0..2 {
            let want = alpha * sx.states[i][j] - sy.states[i][j];
            assert!((sc.states[i][j] - want).norm() < 1e-10);
        }
    }
}

#[test]
fn multipliers_set_growth_rate() {
    let spec = mixed_system();
    let prop = Propagator::new(&spec).unwrap();
    let f = floquet_exponents(prop.monodromy(), OMEGA).unwrap();
    let rho = f.multipliers[0].norm();
    let m = 8;
    let growth = prop.at(m as f64 * OMEGA).unwrap().norm_1().powf(1.0 / m as f64);
    // ||X(omega)^m||^{1/m} tends to the spectral radius
    assert!((growth / rho - 1.0).abs() < 0.3, "growth {growth}, rho {rho}");
}

fn matrix(n: usize, values: &[f64]) -> CMatrix {
    CMatrix::from_real_slice(n, &values[..n * n])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn det_of_exponential(n in 1usize..=5, values in prop::collection::vec(-1.5f64..1.5, 25)) {
        let m = matrix(n, &values);
        let d = expm(&m).det();
        let want = m.trace().exp();
        prop_assert!((d - want).norm() <= 1e-8 * want.norm().max(1.0));
    }

    #[test]
    fn exponential_of_commuting_pair(n in 1usize..=4, values in prop::collection::vec(-1.0f64..1.0, 16), s in -2.0f64..2.0) {
        let a = matrix(n, &values);
        // a and a^2 + s a commute
        let b = &(&a * &a) + &a.scale_real(s);
        let lhs = expm(&(&a + &b));
        let rhs = &expm(&a) * &expm(&b);
        prop_assert!(dist(&lhs, &rhs) <= 1e-9 * lhs.norm_1().max(1.0));
    }

    #[test]
    fn logarithm_round_trip(n in 1usize..=4, values in prop::collection::vec(-2.0f64..2.0, 16)) {
        let m = &matrix(n, &values) + &CMatrix::identity(n).scale_real(0.5);
        prop_assume!(m.det().norm() > 1e-3);
        let l = logm_principal(&m).unwrap();
        prop_assert!(dist(&expm(&l), &m) <= 1e-8 * m.norm_1().max(1.0));
        for z in eig(&l).unwrap().eigenvalues {
            prop_assert!(z.im > -PI - 1e-9 && z.im <= PI + 1e-9);
        }
    }
}
