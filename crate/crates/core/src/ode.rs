//! Dormand-Prince 5(4) with dense output.

use crate::error::{Error, Result};

/// Absolute and relative error targets for one integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl OdeTolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        OdeTolerance { abs, rel }
    }
}

const MAX_STEPS: usize = 2_000_000;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension of one accepted step.
struct DenseStep {
    t_old: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let theta = (t - self.t_old) / self.h;
        let theta1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + theta1 * (self.r[2][i] + theta * (self.r[3][i] + theta1 * self.r[4][i])));
        }
    }
}

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], tol: OdeTolerance) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = tol.abs + tol.rel * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len().max(1) as f64).sqrt()
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, span: f64, tol: OdeTolerance) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| tol.abs + tol.rel * y.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / dim as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + dir * h0 * d).collect();
    let mut f1 = vec![0.0; dim];
    f(t0 + dir * h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `y' = f(t, y)` from `t0` to the last entry of `outputs`,
/// returning the state at every entry of `outputs` (which must be monotone
/// in the direction of integration). Integration may run backwards.
pub fn solve_at<F>(mut f: F, t0: f64, y0: &[f64], outputs: &[f64], tol: OdeTolerance) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let Some(&t1) = outputs.last() else {
        return Ok(Vec::new());
    };
    let mut results = Vec::with_capacity(outputs.len());
    let mut next = 0;
    // outputs sitting on the start point
    while next < outputs.len() && outputs[next] == t0 {
        results.push(y0.to_vec());
        next += 1;
    }
    if next == outputs.len() {
        return Ok(results);
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    f(t, &y, &mut k1);
    let mut h = dir * initial_step(&mut f, t0, &y, &k1, dir, span, tol);
    let mut rejected_last = false;

    for _ in 0..MAX_STEPS {
        let remaining = t1 - t;
        let last = (h.abs() >= remaining.abs()) || remaining.abs() <= 1e-14 * t1.abs().max(1.0);
        if last {
            h = remaining;
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) && !last {
            return Err(Error::StepUnderflow { t });
        }

        for i in 0..dim {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &stage, &mut k2);
        for i in 0..dim {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &stage, &mut k3);
        for i in 0..dim {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &stage, &mut k4);
        for i in 0..dim {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &stage, &mut k5);
        for i in 0..dim {
            stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &stage, &mut k6);
        for i in 0..dim {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let t_new = if last { t1 } else { t + h };
        f(t_new, &y_new, &mut k7);
        for i in 0..dim {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&err, &y, &y_new, tol);
        if !e.is_finite() {
            h *= 0.2;
            rejected_last = true;
            continue;
        }

        if e <= 1.0 {
            let ydiff: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
            let r3: Vec<f64> = (0..dim).map(|i| h * k1[i] - ydiff[i]).collect();
            let r4: Vec<f64> = (0..dim).map(|i| ydiff[i] - h * k7[i] - r3[i]).collect();
            let r5: Vec<f64> = (0..dim)
                .map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
                .collect();
            let dense = DenseStep {
                t_old: t,
                h,
                r: [y.clone(), ydiff, r3, r4, r5],
            };
            while next < outputs.len() && dir * (outputs[next] - t_new) < 0.0 {
                let mut out = vec![0.0; dim];
                dense.eval(outputs[next], &mut out);
                results.push(out);
                next += 1;
            }
            while next < outputs.len() && outputs[next] == t_new {
                results.push(y_new.clone());
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            if last {
                // outputs past t1 cannot exist: t1 is the last output
                return Ok(results);
            }
            let mut factor = 0.9 * e.max(1e-10).powf(-0.2);
            factor = factor.clamp(0.2, 10.0);
            if rejected_last {
                factor = factor.min(1.0);
            }
            h *= factor;
            rejected_last = false;
        } else {
            let factor = (0.9 * e.powf(-0.2)).max(0.2);
            h *= factor;
            rejected_last = true;
        }
    }
    Err(Error::NoConvergence(format!("integrator exceeded {MAX_STEPS} steps")))
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` and returns `y(t1)`.
pub fn solve<F>(f: F, t0: f64, y0: &[f64], t1: f64, tol: OdeTolerance) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    Ok(solve_at(f, t0, y0, &[t1], tol)?.pop().expect("one output"))
}
