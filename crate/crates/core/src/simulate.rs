//! Sampled trajectories `x(t) = X(t) x0`, with paired records at every
//! impulse time.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::floquet::Propagator;
use crate::json::format_float;
use crate::linalg::{CMatrix, C64};
use crate::model::{SystemSpec, Tolerances};
use crate::ode::{solve_at, OdeTolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Cauchy,
    Direct,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cauchy => "cauchy",
            Method::Direct => "direct",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SampleKind {
    LeftLimit,
    PostImpulse,
    Sample,
}

impl SampleKind {
    pub fn name(self) -> &'static str {
        match self {
            SampleKind::Sample => "sample",
            SampleKind::LeftLimit => "left_limit",
            SampleKind::PostImpulse => "post_impulse",
        }
    }
}

/// One output record. `k` is the interval whose continuous branch produced
/// the value (for a left limit at `t_k` that is `k - 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub t: f64,
    pub kind: SampleKind,
    pub k: i64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub method: Method,
    pub tolerances: Tolerances,
    pub points: Vec<SamplePoint>,
    pub states: Vec<Vec<C64>>,
}

/// Output times `0, dt, 2 dt, ... <= t_end` (plus `t_end`), merged with
/// every breakpoint in `(0, t_end]` as a left-limit/post-impulse pair.
pub fn output_grid(spec: &SystemSpec, t_end: f64, dt_out: f64) -> Result<Vec<SamplePoint>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Schema {
            path: "t_end".into(),
            message: format!("must be positive, got {t_end}"),
        });
    }
    if !(dt_out > 0.0 && dt_out.is_finite()) {
        return Err(Error::Schema {
            path: "dt_out".into(),
            message: format!("must be positive, got {dt_out}"),
        });
    }
    let count = (t_end / dt_out + 1e-9).floor() as usize;
    if count > 10_000_000 {
        return Err(Error::Schema {
            path: "dt_out".into(),
            message: "too many output samples".into(),
        });
    }
    let grid = spec.grid();
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let mut breaks = Vec::new();
    let mut k = 1;
    loop {
        let tk = grid.time(k);
        if tk > t_end && !near(tk, t_end) {
            break;
        }
        breaks.push((k, tk));
        k += 1;
    }
    let mut points = Vec::new();
    for &(k, tk) in &breaks {
        points.push(SamplePoint { t: tk, kind: SampleKind::LeftLimit, k: k - 1 });
        points.push(SamplePoint { t: tk, kind: SampleKind::PostImpulse, k });
    }
    let mut samples: Vec<f64> = (0..=count).map(|i| i as f64 * dt_out).collect();
    if !near(*samples.last().expect("nonempty"), t_end) {
        samples.push(t_end);
    }
    for t in samples {
        if breaks.iter().any(|&(_, tk)| near(t, tk)) {
            continue;
        }
        points.push(SamplePoint { t, kind: SampleKind::Sample, k: grid.interval_of(t) });
    }
    points.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.kind.cmp(&b.kind)));
    Ok(points)
}

fn check_initial(spec: &SystemSpec, x0: &[C64]) -> Result<()> {
    if x0.len() != spec.dim() {
        return Err(Error::Schema {
            path: "x0".into(),
            message: format!("expected {} components, found {}", spec.dim(), x0.len()),
        });
    }
    Ok(())
}

/// `x(t) = W(t, 0) x0` on the output grid.
pub fn solve_cauchy(spec: &SystemSpec, x0: &[C64], t_end: f64, dt_out: f64) -> Result<Trajectory> {
    check_initial(spec, x0)?;
    let points = output_grid(spec, t_end, dt_out)?;
    let prop = Propagator::new(spec)?;
    let mut states = vec![Vec::new(); points.len()];
    let mut i = 0;
    while i < points.len() {
        let k = points[i].k;
        let mut end = i;
        while end < points.len() && points[end].k == k {
            end += 1;
        }
        let mut pending = Vec::new();
        for (idx, pt) in points.iter().enumerate().take(end).skip(i) {
            if pt.kind == SampleKind::PostImpulse {
                states[idx] = prop.at_breakpoint(pt.k)?.mul_vec(x0);
            } else {
                pending.push(idx);
            }
        }
        let ts: Vec<f64> = pending.iter().map(|&idx| points[idx].t).collect();
        for (idx, m) in pending.into_iter().zip(prop.on_interval_many(k, &ts)?) {
            states[idx] = m.mul_vec(x0);
        }
        i = end;
    }
    Ok(Trajectory {
        method: Method::Cauchy,
        tolerances: *spec.tolerances(),
        points,
        states,
    })
}

/// Stacks real and imaginary parts: `[re_1..re_n, im_1..im_n]`.
fn split(v: &[C64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

fn join(v: &[f64], n: usize) -> Vec<C64> {
    (0..n).map(|i| C64::new(v[i], v[n + i])).collect()
}

/// Direct integration: on each interval first resolve `v = x(zeta_k)` from
/// the entry value, then integrate `x' = A x + B v` and jump at the right
/// end. Shares no code with the Cauchy-matrix path beyond the stepper.
pub fn solve_direct(spec: &SystemSpec, x0: &[C64], t_end: f64, dt_out: f64) -> Result<Trajectory> {
    check_initial(spec, x0)?;
    let points = output_grid(spec, t_end, dt_out)?;
    let n = spec.dim();
    let grid = spec.grid();
    let tol = OdeTolerance::new(spec.tolerances().ode_abs, spec.tolerances().ode_rel);
    let mut states = vec![Vec::new(); points.len()];
    let mut x_entry = x0.to_vec();
    let last_k = points.iter().map(|p| p.k).max().unwrap_or(0);
    let mut cursor = 0;
    for k in 0..=last_k {
        let (tk, zeta, tk1) = (grid.time(k), grid.arg(k), grid.time(k + 1));
        let v = if zeta == tk {
            x_entry.clone()
        } else {
            resolve_argument(spec, &x_entry, tk, zeta, tol)?
        };
        let v_split = split(&v);

        let mut targets = Vec::new();
        let mut owners = Vec::new();
        while cursor < points.len() && points[cursor].k <= k {
            let pt = points[cursor];
            if pt.kind == SampleKind::PostImpulse {
                // recorded when the jump is applied below
            } else if pt.t == tk && pt.kind == SampleKind::Sample {
                states[cursor] = x_entry.clone();
            } else {
                targets.push(pt.t);
                owners.push(cursor);
            }
            cursor += 1;
        }
        if !owners.is_empty() || k < last_k {
            let include_end = targets.last().is_none_or(|&t| t < tk1);
            if include_end {
                targets.push(tk1);
            }
            let a_fn = spec.a();
            let b_fn = spec.b();
            let mut a = vec![0.0; n * n];
            let mut b = vec![0.0; n * n];
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
                a_fn.eval_into(t, &mut a);
                b_fn.eval_into(t, &mut b);
                for part in 0..2 {
                    let off = part * n;
                    for i in 0..n {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += a[i * n + j] * y[off + j] + b[i * n + j] * v_split[off + j];
                        }
                        dy[off + i] = acc;
                    }
                }
            };
            let out = solve_at(rhs, tk, &split(&x_entry), &targets, tol)?;
            for (&idx, y) in owners.iter().zip(&out) {
                states[idx] = join(y, n);
            }
            let left = join(out.last().expect("end of interval"), n);
            x_entry = spec.jump(k + 1).mul_vec(&left);
        }
        if let Some(idx) = points
            .iter()
            .position(|p| p.kind == SampleKind::PostImpulse && p.k == k + 1)
        {
            states[idx] = x_entry.clone();
        }
    }
    Ok(Trajectory {
        method: Method::Direct,
        tolerances: *spec.tolerances(),
        points,
        states,
    })
}

/// Solves `(I - Z(zeta)) v = y(zeta)` where `y' = A y`, `y(t_k) = x_k` and
/// `Z' = A Z + B`, `Z(t_k) = 0`.
fn resolve_argument(spec: &SystemSpec, x_entry: &[C64], tk: f64, zeta: f64, tol: OdeTolerance) -> Result<Vec<C64>> {
    let n = spec.dim();
    let nn = n * n;
    let mut y0 = split(x_entry);
    y0.extend(std::iter::repeat_n(0.0, nn));
    let a_fn = spec.a();
    let b_fn = spec.b();
    let mut a = vec![0.0; nn];
    let mut b = vec![0.0; nn];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        a_fn.eval_into(t, &mut a);
        b_fn.eval_into(t, &mut b);
        for part in 0..2 {
            let off = part * n;
            for i in 0..n {
                dy[off + i] = (0..n).map(|j| a[i * n + j] * y[off + j]).sum();
            }
        }
        let z = &y[2 * n..];
        for i in 0..n {
            for j in 0..n {
                let acc: f64 = (0..n).map(|l| a[i * n + l] * z[l * n + j]).sum();
                dy[2 * n + i * n + j] = acc + b[i * n + j];
            }
        }
    };
    let end = solve_at(rhs, tk, &y0, &[zeta], tol)?.remove(0);
    let y = join(&end, n);
    let z = CMatrix::from_real_slice(n, &end[2 * n..]);
    let lhs = &CMatrix::identity(n) - &z;
    let lu = lhs
        .lu()
        .map_err(|_| Error::Singular(format!("I - Z(zeta) is singular on the interval starting at {tk}")))?;
    Ok(lu.solve_vec(&y))
}

impl Trajectory {
    /// Largest state norm over all records.
    pub fn scale(&self) -> f64 {
        self.states.iter().map(|s| vec_norm(s)).fold(0.0, f64::max)
    }

    /// `max_i |x_i - y_i|` over matching records of two trajectories.
    pub fn max_discrepancy(&self, other: &Trajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,kind,re_x1,im_x1,...`; a `method` column is
    /// prepended when `with_method` is set.
    pub fn to_csv(&self, with_method: bool) -> String {
        let mut out = String::new();
        self.write_csv(&mut out, with_method, true);
        out
    }

    pub fn write_csv(&self, out: &mut String, with_method: bool, header: bool) {
        let n = self.states.first().map_or(0, Vec::len);
        if header {
            if with_method {
                out.push_str("method,");
            }
            out.push_str("t,kind");
            for i in 1..=n {
                let _ = write!(out, ",re_x{i},im_x{i}");
            }
            out.push('\n');
        }
        for (pt, state) in self.points.iter().zip(&self.states) {
            if with_method {
                out.push_str(self.method.name());
                out.push(',');
            }
            out.push_str(&format_float(pt.t));
            out.push(',');
            out.push_str(pt.kind.name());
            for z in state {
                let _ = write!(out, ",{},{}", format_float(z.re), format_float(z.im));
            }
            out.push('\n');
        }
    }
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArgumentGrid, MatrixFunction};

    fn scalar(a: f64, c: f64) -> SystemSpec {
        SystemSpec::new(
            MatrixFunction::zero(1, 1.0),
            MatrixFunction::constant(&[vec![a - 1.0]], 1.0),
            vec![CMatrix::from_real_rows(&[vec![c - 1.0]])],
            ArgumentGrid::floor(1.0),
            Tolerances::default(),
        )
        .unwrap()
    }

    fn value_at(tr: &Trajectory, t: f64, kind: SampleKind) -> C64 {
        let i = tr
            .points
            .iter()
            .position(|p| (p.t - t).abs() < 1e-12 && p.kind == kind)
            .unwrap();
        tr.states[i][0]
    }

    #[test]
    fn grid_pairs_breakpoints() {
        let spec = scalar(-0.3, 10.0 / 3.0);
        let pts = output_grid(&spec, 2.0, 0.5).unwrap();
        let kinds: Vec<_> = pts.iter().map(|p| (p.t, p.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (0.0, SampleKind::Sample),
                (0.5, SampleKind::Sample),
                (1.0, SampleKind::LeftLimit),
                (1.0, SampleKind::PostImpulse),
                (1.5, SampleKind::Sample),
                (2.0, SampleKind::LeftLimit),
                (2.0, SampleKind::PostImpulse),
            ]
        );
    }

    #[test]
    fn sawtooth_of_scalar_example() {
        let spec = scalar(-0.3, 10.0 / 3.0);
        let x0 = [C64::new(6.0, 0.0)];
        for tr in [
            solve_cauchy(&spec, &x0, 3.0, 0.5).unwrap(),
            solve_direct(&spec, &x0, 3.0, 0.5).unwrap(),
        ] {
            assert!((value_at(&tr, 0.5, SampleKind::Sample).re - 2.1).abs() < 1e-10);
            assert!((value_at(&tr, 1.5, SampleKind::Sample).re + 2.1).abs() < 1e-10);
            assert!((value_at(&tr, 1.0, SampleKind::LeftLimit).re - 6.0 * -0.3).abs() < 1e-10);
            assert!((value_at(&tr, 1.0, SampleKind::PostImpulse).re + 6.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_initial_data_stays_zero() {
        let spec = scalar(0.5, 2.0);
        let tr = solve_direct(&spec, &[C64::new(0.0, 0.0)], 2.5, 0.25).unwrap();
        assert_eq!(tr.scale(), 0.0);
    }

    #[test]
    fn advanced_argument_matches_cauchy() {
        let spec = SystemSpec::new(
            MatrixFunction::parse(&[vec!["0.3*cos(2*pi*t)"]], 1.0).unwrap(),
            MatrixFunction::parse(&[vec!["-0.4 + 0.2*sin(2*pi*t)"]], 1.0).unwrap(),
            vec![CMatrix::from_real_rows(&[vec![0.5]]), CMatrix::from_real_rows(&[vec![-0.2]])],
            ArgumentGrid::new(1.0, vec![0.0, 0.4, 1.0], vec![0.3, 1.0]).unwrap(),
            Tolerances::default(),
        )
        .unwrap();
        let x0 = [C64::new(1.0, -2.0)];
        let a = solve_cauchy(&spec, &x0, 3.0, 0.1).unwrap();
        let b = solve_direct(&spec, &x0, 3.0, 0.1).unwrap();
        assert!(a.max_discrepancy(&b) < 1e-8 * a.scale().max(1.0));
    }

    #[test]
    fn wrong_length_initial_vector() {
        let spec = scalar(0.5, 2.0);
        assert!(matches!(
            solve_cauchy(&spec, &[C64::new(1.0, 0.0); 2], 1.0, 0.1),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let spec = scalar(0.5, 2.0);
        let tr = solve_cauchy(&spec, &[C64::new(1.0, 0.0)], 0.5, 0.5).unwrap();
        let csv = tr.to_csv(false);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,kind,re_x1,im_x1"));
        assert_eq!(
            lines.next(),
            Some("0.000000000000e+00,sample,1.000000000000e+00,0.000000000000e+00")
        );
    }
}
