//! End-to-end checks against the known results for the bundled examples.
//! Prints one line per criterion and exits non-zero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use idepcag::floquet::{
    analyze, closed_form_diagonal, floquet_exponents, verify_normal_form, AnalyzeOptions, NormalForm, Propagator,
    Verdict,
};
use idepcag::linalg::{eig, expm, logm_principal, CMatrix, C64};
use idepcag::model::{load_system, ArgumentGrid, MatrixFunction, SystemSpec, Tolerances};
use idepcag::simulate::{solve_cauchy, solve_direct};
use idepcag::sweep::substitute;
use idepcag::systems;
use idepcag::transition::fundamental_matrix;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let spec = load_system(systems::SCALAR_IMPULSE).map_err(fail)?;
    let report = analyze(&spec, AnalyzeOptions::default()).map_err(fail)?;
    let x = report.monodromy[(0, 0)];
    let err = (x - C64::new(-1.0, 0.0)).norm();
    let elapsed = start.elapsed().as_secs_f64();
    ensure(
        err <= 1e-12 && report.verdict == Verdict::PeriodicNOmega(2) && report.oscillatory && elapsed < 1.0,
        format!(
            "scalar example X(1) = {:.15}, |X(1) + 1| = {}, verdict {}, oscillatory {}, {elapsed:.3} s",
            x.re,
            sci(err),
            report.verdict,
            report.oscillatory
        ),
    )
}

fn sweep_rows(range: &str) -> Result<Vec<Vec<String>>, String> {
    let template = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/systems/scalar_impulse.template.json");
    let out = Command::new(env!("CARGO_BIN_EXE_idepcag"))
        .args(["sweep", template.to_str().unwrap(), "--param", "AC", "--range", range, "--steps", "3"])
        .env("FLOQUET_LOG", "error")
        .output()
        .map_err(fail)?;
    if !out.status.success() {
        return Err(format!("sweep exited with {:?}", out.status.code()));
    }
    let text = String::from_utf8(out.stdout).map_err(fail)?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect())
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut rows = sweep_rows("-1.5:-0.5")?;
    rows.extend(sweep_rows("0.5:1.5")?);
    let expected = [
        (-1.5, "Unbounded", "true"),
        (-1.0, "PeriodicNOmega(2)", "true"),
        (-0.5, "ExponentiallyStable", "true"),
        (0.5, "ExponentiallyStable", "false"),
        (1.0, "PeriodicOmega", "false"),
        (1.5, "Unbounded", "false"),
    ];
    let mut ok = rows.len() == expected.len();
    let mut cells = Vec::new();
    for (row, (ac, verdict, osc)) in rows.iter().zip(expected) {
        let value: f64 = row[0].parse().unwrap_or(f64::NAN);
        let matched = (value - ac).abs() < 1e-12 && row[3] == verdict && row[4] == osc;
        ok &= matched;
        cells.push(format!("AC={ac}:{}{}", row[3], if row[4] == "true" { "/osc" } else { "" }));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(ok && elapsed < 5.0, format!("behaviour table {} ({elapsed:.3} s)", cells.join(" ")))
}

fn criterion_3() -> Check {
    let cases = [
        (-0.8, Verdict::ExponentiallyStable, Some(0.8f64.ln())),
        (1.1, Verdict::Unbounded, Some(1.1f64.ln())),
        (-1.0, Verdict::PeriodicNOmega(2), None),
        (1.0, Verdict::PeriodicOmega, None),
    ];
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut verdicts = Vec::new();
    for (c, verdict, lyapunov) in cases {
        let text = substitute(systems::SIN_IMPULSE_TEMPLATE, "c", c).map_err(fail)?;
        let spec = load_system(&text).map_err(fail)?;
        let report = analyze(&spec, AnalyzeOptions { verify_samples: 0 }).map_err(fail)?;
        let err = (report.monodromy[(0, 0)] - C64::new(c, 0.0)).norm();
        worst = worst.max(err);
        ok &= err <= 1e-9 && report.verdict == verdict;
        if let Some(l) = lyapunov {
            ok &= (report.lyapunov[0] - l).abs() <= 1e-9;
        }
        verdicts.push(format!("c={c}:{}", report.verdict));
    }
    ensure(ok, format!("sin example {}, max |X(1) - c| = {}", verdicts.join(" "), sci(worst)))
}

fn criterion_4() -> Check {
    let start = Instant::now();
    let spec = load_system(systems::ROTATION_2X2).map_err(fail)?;
    let report = analyze(&spec, AnalyzeOptions { verify_samples: 0 }).map_err(fail)?;
    let targets = [C64::new(0.878964, -1.05742), C64::new(0.878964, 1.05742)];
    let eig_err = targets
        .iter()
        .map(|t| report.multipliers.iter().map(|m| (m - t).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let phi = fundamental_matrix(&spec, 0.0, 2.0 * PI).map_err(fail)?;
    let phi_err = (&phi - &CMatrix::identity(2)).norm_1();
    let round_trip = (&expm(&report.p.scale_real(spec.omega())) - &report.monodromy).norm_1();
    let elapsed = start.elapsed().as_secs_f64();
    ensure(
        eig_err <= 1e-3
            && report.verdict == Verdict::Unbounded
            && phi_err <= 1e-8
            && round_trip <= 1e-8
            && elapsed < 5.0,
        format!(
            "rotation example multipliers {:.6}±{:.6}i (err {}), verdict {}, |Phi(2pi,0) - I| = {}, |expm(wP) - X| = {}, {elapsed:.3} s",
            report.multipliers[0].re,
            report.multipliers[0].im.abs(),
            sci(eig_err),
            report.verdict,
            sci(phi_err),
            sci(round_trip)
        ),
    )
}

fn criterion_5() -> Check {
    let spec = load_system(systems::MARKUS_YAMABE).map_err(fail)?;
    let report = analyze(&spec, AnalyzeOptions { verify_samples: 0 }).map_err(fail)?;
    let want = [-(PI / 2.0).exp(), -(-PI).exp()];
    let rel = want
        .iter()
        .zip(&report.multipliers)
        .map(|(w, m)| (m - C64::new(*w, 0.0)).norm() / w.abs())
        .fold(0.0, f64::max);
    let det_err = (report.monodromy.det().re - (-PI / 2.0).exp()).abs() / (-PI / 2.0).exp();
    // the frozen-time eigenvalues of A(t) are (-1 +- i sqrt 7) / 4 for every t
    let frozen_stable = [0.0, 0.7, 1.9, 2.8]
        .iter()
        .all(|&t| eig(&spec.a().eval(t)).is_ok_and(|s| s.eigenvalues.iter().all(|z| (z.re + 0.25).abs() < 1e-12)));
    ensure(
        rel <= 1e-6 && det_err <= 1e-6 && report.verdict == Verdict::Unbounded && frozen_stable,
        format!(
            "Markus-Yamabe multipliers {:.10}, {:.10} (rel err {}), det rel err {}, verdict {}, frozen Re = -1/4: {frozen_stable}",
            report.multipliers[0].re,
            report.multipliers[1].re,
            sci(rel),
            sci(det_err),
            report.verdict
        ),
    )
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let names = [
        "factorization",
        "q_periodicity",
        "q_equation",
        "biperiodicity_phi",
        "biperiodicity_j",
        "biperiodicity_e",
        "det_product",
    ];
    let mut ok = true;
    let mut worst = vec![0.0f64; names.len()];
    for (_, doc) in systems::ALL {
        let spec = load_system(doc).map_err(fail)?;
        let prop = Propagator::new(&spec).map_err(fail)?;
        let multipliers = floquet_exponents(prop.monodromy(), spec.omega()).map_err(fail)?;
        let form = NormalForm::complex(prop.monodromy(), spec.omega()).map_err(fail)?;
        let report = verify_normal_form(&prop, &form, &multipliers, 32).map_err(fail)?;
        for (i, name) in names.iter().enumerate() {
            let r = report.get(name).ok_or_else(|| format!("missing residual {name}"))?;
            ok &= r.passed;
            worst[i] = worst[i].max(r.value);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let cells: Vec<String> = names.iter().zip(&worst).map(|(n, w)| format!("{n}={}", sci(*w))).collect();
    ensure(ok && elapsed < 30.0, format!("identity suite max over 4 systems: {} ({elapsed:.3} s)", cells.join(" ")))
}

/// `X(omega)` of a system with constant `A` and `B = 0`, assembled from
/// exponentials and jumps.
fn impulsive_ode_product(a: &CMatrix, times: &[f64], impulses: &[CMatrix]) -> CMatrix {
    let n = a.dim();
    let mut x = CMatrix::identity(n);
    for (r, c) in impulses.iter().enumerate() {
        let flow = expm(&a.scale_real(times[r + 1] - times[r]));
        x = &(&(&CMatrix::identity(n) + c) * &flow) * &x;
    }
    x
}

/// `E(t, zeta) = e^{A (t - zeta)} + A^{-1} (e^{A (t - zeta)} - I) B` for constant `A`, `B`.
fn constant_e(a: &CMatrix, b: &CMatrix, t: f64, zeta: f64) -> CMatrix {
    let flow = expm(&a.scale_real(t - zeta));
    let ident = CMatrix::identity(a.dim());
    &flow + &(&(&a.inv().unwrap() * &(&flow - &ident)) * b)
}

fn criterion_7() -> Check {
    // direct vs Cauchy on every bundled system over five periods, with
    // integrator tolerances tight enough for an absolute bound on the
    // growing Markus-Yamabe solutions
    let tight = Tolerances {
        ode_abs: 1e-12,
        ode_rel: 1e-12,
        ..Tolerances::default()
    };
    let mut sim_worst = 0.0f64;
    for (name, doc) in systems::ALL {
        let spec = load_system(doc).map_err(fail)?.with_tolerances(tight);
        let n = spec.dim();
        let x0: Vec<C64> = (0..n).map(|i| C64::new(1.0 - 0.5 * i as f64, 0.25 * i as f64)).collect();
        let t_end = 5.0 * spec.omega();
        let dt = spec.omega() / 20.0;
        let a = solve_cauchy(&spec, &x0, t_end, dt).map_err(fail)?;
        let b = solve_direct(&spec, &x0, t_end, dt).map_err(fail)?;
        let gap = a.max_discrepancy(&b);
        if gap > 1e-7 {
            return Err(format!("{name}: direct vs Cauchy discrepancy {}", sci(gap)));
        }
        sim_worst = sim_worst.max(gap);
    }

    // diagonal closed form vs the numeric pipeline on the scalar systems
    let mut diag_worst = 0.0f64;
    for doc in [systems::SCALAR_IMPULSE, systems::SIN_IMPULSE] {
        let spec = load_system(doc).map_err(fail)?;
        let prop = Propagator::new(&spec).map_err(fail)?;
        let closed = closed_form_diagonal(&spec).map_err(fail)?;
        let numeric_p = NormalForm::complex(prop.monodromy(), spec.omega()).map_err(fail)?.p;
        diag_worst = diag_worst.max((&numeric_p - &closed.p).norm_1());
        for t in [0.1, 0.37, 0.99, 1.5, 2.75] {
            let x = prop.at(t).map_err(fail)?;
            diag_worst = diag_worst.max((&x - &closed.x_at(t).map_err(fail)?).norm_1());
        }
    }

    // B = 0: product of jumps and flows
    let omega = 2.0;
    let a = CMatrix::from_real_rows(&[vec![0.2, 1.0], vec![-0.7, -0.4]]);
    let jumps = vec![
        CMatrix::from_real_rows(&[vec![0.3, 0.0], vec![0.1, -0.5]]),
        CMatrix::from_real_rows(&[vec![-0.2, 0.4], vec![0.0, 0.1]]),
    ];
    let times = [0.0, 0.8, omega];
    let rows = |m: &CMatrix| -> Vec<Vec<f64>> { m.rows().iter().map(|r| r.iter().map(|z| z.re).collect()).collect() };
    let grid = ArgumentGrid::new(omega, times.to_vec(), vec![0.3, 1.9]).map_err(fail)?;
    let spec = SystemSpec::new(
        MatrixFunction::constant(&rows(&a), omega),
        MatrixFunction::zero(2, omega),
        jumps.clone(),
        grid.clone(),
        Tolerances::default(),
    )
    .map_err(fail)?;
    let x = Propagator::new(&spec).map_err(fail)?.monodromy().clone();
    let b_zero = (&x - &impulsive_ode_product(&a, &times, &jumps)).norm_1();

    // C = 0: product of E(t_{k+1}, zeta_k) E(t_k, zeta_k)^{-1}
    let b = CMatrix::from_real_rows(&[vec![0.1, -0.2], vec![0.3, 0.05]]);
    let spec = SystemSpec::new(
        MatrixFunction::constant(&rows(&a), omega),
        MatrixFunction::constant(&rows(&b), omega),
        vec![CMatrix::zeros(2), CMatrix::zeros(2)],
        grid,
        Tolerances::default(),
    )
    .map_err(fail)?;
    let x = Propagator::new(&spec).map_err(fail)?.monodromy().clone();
    let mut product = CMatrix::identity(2);
    for (k, zeta) in [0.3, 1.9].iter().enumerate() {
        let step = &constant_e(&a, &b, times[k + 1], *zeta) * &constant_e(&a, &b, times[k], *zeta).inv().unwrap();
        product = &step * &product;
    }
    let c_zero = (&x - &product).norm_1();

    ensure(
        diag_worst <= 1e-7 && b_zero <= 1e-8 && c_zero <= 1e-8,
        format!(
            "oracles: direct vs Cauchy {}, diagonal closed form {}, B=0 product {}, C=0 product {}",
            sci(sim_worst),
            sci(diag_worst),
            sci(b_zero),
            sci(c_zero)
        ),
    )
}

fn criterion_8() -> Check {
    let spec = load_system(systems::ROTATION_2X2).map_err(fail)?;
    let prop = Propagator::new(&spec).map_err(fail)?;
    let omega = spec.omega();
    let spectrum = eig(prop.monodromy()).map_err(fail)?;
    let mut worst = 0.0f64;
    for j in 0..2 {
        let rho = spectrum.eigenvalues[j];
        let v = spectrum.eigenvector(j).ok_or("missing eigenvector")?;
        for i in 0..40 {
            let t = -omega + 3.0 * omega * i as f64 / 40.0 + 0.013;
            let now = prop.at(t).map_err(fail)?.mul_vec(&v);
            let later = prop.at(t + omega).map_err(fail)?.mul_vec(&v);
            let norm = now.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let diff = later.iter().zip(&now).map(|(a, b)| (a - rho * b).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(diff / norm);
        }
    }
    ensure(worst <= 1e-5, format!("multiplier property on rotation example: max |x(t+w) - rho x(t)| / |x(t)| = {}", sci(worst)))
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut log_worst, mut det_worst, mut eig_worst, mut prod_worst) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    while count < 100 {
        let n = rng.gen_range(1..=6);
        let values: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let m = CMatrix::from_real_slice(n, &values);
        if m.det().norm() < 1e-3 {
            continue;
        }
        count += 1;
        let scale = m.norm_1().max(1.0);
        let l = logm_principal(&m).map_err(fail)?;
        log_worst = log_worst.max((&expm(&l) - &m).norm_1() / scale);

        let small = m.scale_real(0.5);
        let want = small.trace().exp();
        det_worst = det_worst.max((expm(&small).det() - want).norm() / want.norm().max(1.0));

        let s = eig(&m).map_err(fail)?;
        let det = m.det();
        let product: C64 = s.eigenvalues.iter().product();
        prod_worst = prod_worst.max((product - det).norm() / det.norm().max(1.0));
        for j in 0..n {
            let v = s.eigenvector(j).ok_or("missing eigenvector")?;
            let mv = m.mul_vec(&v);
            let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let r = mv.iter().zip(&v).map(|(a, b)| (a - s.eigenvalues[j] * b).norm_sqr()).sum::<f64>().sqrt();
            eig_worst = eig_worst.max(r / (m.norm_1() * vnorm));
        }
    }
    ensure(
        log_worst <= 1e-8 && det_worst <= 1e-8 && eig_worst <= 1e-8 && prod_worst <= 1e-8,
        format!(
            "kernels on 100 random matrices: expm(logm) {}, det(expm) {}, eig residual {}, eigenvalue product {}",
            sci(log_worst),
            sci(det_worst),
            sci(eig_worst),
            sci(prod_worst)
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Check); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (id, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {id}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL  {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
