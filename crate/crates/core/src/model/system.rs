use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expr::{parse_expression, Expr};
use super::grid::ArgumentGrid;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Maximum supported state dimension.
pub const MAX_DIM: usize = 16;

/// Samples used by the periodicity certificate.
const CERTIFICATE_SAMPLES: usize = 200;
const CERTIFICATE_TOL: f64 = 1e-9;

/// `n x n` grid of expressions with a declared period.
#[derive(Clone, Debug)]
pub struct MatrixFunction {
    n: usize,
    entries: Vec<Expr>,
    period: f64,
}

impl MatrixFunction {
    pub fn new(n: usize, entries: Vec<Expr>, period: f64) -> Self {
        assert_eq!(entries.len(), n * n, "matrix function needs n*n entries");
        MatrixFunction { n, entries, period }
    }

    pub fn zero(n: usize, period: f64) -> Self {
        Self::new(n, vec![Expr::Const(0.0); n * n], period)
    }

    pub fn constant(values: &[Vec<f64>], period: f64) -> Self {
        let n = values.len();
        let entries = values.iter().flatten().map(|&v| Expr::Const(v)).collect();
        Self::new(n, entries, period)
    }

    pub fn parse(rows: &[Vec<&str>], period: f64) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "matrix function must be square");
            for text in row {
                entries.push(parse_expression(text)?);
            }
        }
        Ok(Self::new(n, entries, period))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.n + j]
    }

    /// Row-major real values at `t`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.entries) {
            *o = e.eval(t);
        }
    }

    pub fn eval_real(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval(&self, t: f64) -> CMatrix {
        CMatrix::from_real_slice(self.n, &self.eval_real(t))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Expr::is_zero)
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().all(|e| e.constant_value().is_some())
    }

    /// Off-diagonal entries are structurally zero.
    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.entry(i, j).is_zero()))
    }

    /// Matrix 1-norm at `t`.
    pub fn norm_1(&self, t: f64) -> f64 {
        let v = self.eval_real(t);
        (0..self.n)
            .map(|j| (0..self.n).map(|i| v[i * self.n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max over seeded random `t` in `[0, omega)` of `||F(t + omega) - F(t)||_1`.
    pub fn periodicity_deviation(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = self.period;
        let mut worst: f64 = 0.0;
        let mut a = vec![0.0; self.n * self.n];
        let mut b = vec![0.0; self.n * self.n];
        for _ in 0..samples {
            let t = rng.gen_range(0.0..omega);
            self.eval_into(t, &mut a);
            self.eval_into(t + omega, &mut b);
            let dev = (0..self.n)
                .map(|j| (0..self.n).map(|i| (a[i * self.n + j] - b[i * self.n + j]).abs()).sum::<f64>())
                .fold(0.0, f64::max);
            worst = worst.max(if dev.is_nan() { f64::INFINITY } else { dev });
        }
        worst
    }
}

/// Integration and algebraic tolerances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_ode_abs")]
    pub ode_abs: f64,
    #[serde(default = "default_ode_rel")]
    pub ode_rel: f64,
    #[serde(default = "default_alg")]
    pub alg: f64,
}

fn default_ode_abs() -> f64 {
    1e-10
}
fn default_ode_rel() -> f64 {
    1e-10
}
fn default_alg() -> f64 {
    1e-9
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_abs: default_ode_abs(),
            ode_rel: default_ode_rel(),
            alg: default_alg(),
        }
    }
}

/// One omega-periodic linear system
/// `x' = A(t) x + B(t) x(gamma(t))`, `x(t_k) = (I + C_k) x(t_k^-)`.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    n: usize,
    a: MatrixFunction,
    b: MatrixFunction,
    impulses: Vec<CMatrix>,
    jumps: Vec<CMatrix>,
    grid: ArgumentGrid,
    tolerances: Tolerances,
}

impl SystemSpec {
    /// Validates and assembles a system. `impulses[r]` is `C_{r+1}`, applied
    /// at `t_{r+1}`.
    pub fn new(
        a: MatrixFunction,
        b: MatrixFunction,
        impulses: Vec<CMatrix>,
        grid: ArgumentGrid,
        tolerances: Tolerances,
    ) -> Result<Self> {
        Self::build(a, b, impulses, grid, tolerances, true)
    }

    fn build(
        a: MatrixFunction,
        b: MatrixFunction,
        impulses: Vec<CMatrix>,
        grid: ArgumentGrid,
        tolerances: Tolerances,
        certify: bool,
    ) -> Result<Self> {
        let n = a.dim();
        let omega = grid.period();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Schema {
                path: "n".into(),
                message: format!("dimension must be in 1..={MAX_DIM}, got {n}"),
            });
        }
        if b.dim() != n {
            return Err(Error::Schema {
                path: "B".into(),
                message: format!("expected {n}x{n}, found {0}x{0}", b.dim()),
            });
        }
        for (name, f) in [("A", &a), ("B", &b)] {
            if f.period() != omega {
                return Err(Error::Schema {
                    path: name.into(),
                    message: format!("declared period {} differs from grid period {omega}", f.period()),
                });
            }
        }
        if impulses.len() != grid.count() {
            return Err(Error::Schema {
                path: "impulses".into(),
                message: format!("expected {} matrices, found {}", grid.count(), impulses.len()),
            });
        }
        let mut jumps = Vec::with_capacity(impulses.len());
        for (index, c) in impulses.iter().enumerate() {
            if c.dim() != n {
                return Err(Error::Schema {
                    path: format!("impulses[{index}]"),
                    message: format!("expected {n}x{n}"),
                });
            }
            let jump = &CMatrix::identity(n) + c;
            let det = jump.det().norm();
            if !(det > 1e-12) {
                return Err(Error::SingularImpulse { index, det });
            }
            jumps.push(jump);
        }
        for (name, tol) in [
            ("tolerances.ode_abs", tolerances.ode_abs),
            ("tolerances.ode_rel", tolerances.ode_rel),
            ("tolerances.alg", tolerances.alg),
        ] {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::Schema {
                    path: name.into(),
                    message: format!("tolerance must be positive, got {tol}"),
                });
            }
        }
        if certify {
            for (name, f) in [("A", &a), ("B", &b)] {
                let deviation = f.periodicity_deviation(CERTIFICATE_SAMPLES, 0x5eed);
                if !(deviation <= CERTIFICATE_TOL) {
                    return Err(Error::NotPeriodic {
                        field: name.into(),
                        omega,
                        deviation,
                    });
                }
            }
        }
        Ok(SystemSpec {
            n,
            a,
            b,
            impulses,
            jumps,
            grid,
            tolerances,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn omega(&self) -> f64 {
        self.grid.period()
    }

    pub fn a(&self) -> &MatrixFunction {
        &self.a
    }

    pub fn b(&self) -> &MatrixFunction {
        &self.b
    }

    pub fn grid(&self) -> &ArgumentGrid {
        &self.grid
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tolerances
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    /// `C_k` for a global breakpoint index `k` (cyclic, `C_{k+p} = C_k`).
    pub fn impulse(&self, k: i64) -> &CMatrix {
        &self.impulses[(k - 1).rem_euclid(self.impulses.len() as i64) as usize]
    }

    /// `I + C_k`.
    pub fn jump(&self, k: i64) -> &CMatrix {
        &self.jumps[(k - 1).rem_euclid(self.jumps.len() as i64) as usize]
    }

    pub fn impulses(&self) -> &[CMatrix] {
        &self.impulses
    }

    /// A, B and every C_k are diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.a.is_diagonal() && self.b.is_diagonal() && self.impulses.iter().all(CMatrix::is_diagonal)
    }
}

/// Options for [`load_system_with`].
#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    /// Reject coefficient functions that fail the periodicity certificate.
    pub certify_periodicity: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            certify_periodicity: true,
        }
    }
}

/// Impulse entry: a number or a constant expression such as `"0.5*3 - 1"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

/// JSON system document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub n: usize,
    pub omega: f64,
    pub p: usize,
    pub times: Vec<f64>,
    pub args: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<String>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<String>>,
    pub impulses: Vec<Vec<Vec<Scalar>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

pub fn load_system(document: &str) -> Result<SystemSpec> {
    load_system_with(document, LoadOptions::default())
}

pub fn load_system_with(document: &str, options: LoadOptions) -> Result<SystemSpec> {
    let doc: SystemDocument = serde_json::from_str(document)?;
    build_from_document(&doc, options)
}

fn matrix_function(rows: &[Vec<String>], n: usize, omega: f64, name: &str) -> Result<MatrixFunction> {
    if rows.len() != n {
        return Err(Error::Schema {
            path: name.into(),
            message: format!("expected {n} rows, found {}", rows.len()),
        });
    }
    let mut entries = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Schema {
                path: format!("{name}[{i}]"),
                message: format!("expected {n} entries, found {}", row.len()),
            });
        }
        for (j, text) in row.iter().enumerate() {
            let expr = parse_expression(text).map_err(|e| Error::Schema {
                path: format!("{name}[{i}][{j}]"),
                message: e.to_string(),
            })?;
            entries.push(expr);
        }
    }
    Ok(MatrixFunction::new(n, entries, omega))
}

fn scalar_value(s: &Scalar, path: &str) -> Result<f64> {
    let value = match s {
        Scalar::Number(x) => *x,
        Scalar::Text(text) => {
            let expr = parse_expression(text).map_err(|e| Error::Schema {
                path: path.into(),
                message: e.to_string(),
            })?;
            if expr.depends_on_time() {
                return Err(Error::Schema {
                    path: path.into(),
                    message: "impulse entries must be constant".into(),
                });
            }
            expr.eval(0.0)
        }
    };
    if !value.is_finite() {
        return Err(Error::Schema {
            path: path.into(),
            message: format!("non-finite value {value}"),
        });
    }
    Ok(value)
}

fn build_from_document(doc: &SystemDocument, options: LoadOptions) -> Result<SystemSpec> {
    let n = doc.n;
    if n == 0 || n > MAX_DIM {
        return Err(Error::Schema {
            path: "n".into(),
            message: format!("dimension must be in 1..={MAX_DIM}, got {n}"),
        });
    }
    if doc.p == 0 {
        return Err(Error::Schema {
            path: "p".into(),
            message: "need at least one interval per period".into(),
        });
    }
    if doc.times.len() != doc.p + 1 {
        return Err(Error::Schema {
            path: "times".into(),
            message: format!("expected p + 1 = {} entries, found {}", doc.p + 1, doc.times.len()),
        });
    }
    if doc.args.len() != doc.p {
        return Err(Error::Schema {
            path: "args".into(),
            message: format!("expected p = {} entries, found {}", doc.p, doc.args.len()),
        });
    }
    if doc.impulses.len() != doc.p {
        return Err(Error::Schema {
            path: "impulses".into(),
            message: format!("expected p = {} matrices, found {}", doc.p, doc.impulses.len()),
        });
    }
    let grid = ArgumentGrid::new(doc.omega, doc.times.clone(), doc.args.clone())?;
    let a = matrix_function(&doc.a, n, doc.omega, "A")?;
    let b = matrix_function(&doc.b, n, doc.omega, "B")?;
    let mut impulses = Vec::with_capacity(doc.p);
    for (r, m) in doc.impulses.iter().enumerate() {
        if m.len() != n {
            return Err(Error::Schema {
                path: format!("impulses[{r}]"),
                message: format!("expected {n} rows, found {}", m.len()),
            });
        }
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in m.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Schema {
                    path: format!("impulses[{r}][{i}]"),
                    message: format!("expected {n} entries, found {}", row.len()),
                });
            }
            for (j, s) in row.iter().enumerate() {
                values.push(scalar_value(s, &format!("impulses[{r}][{i}][{j}]"))?);
            }
        }
        impulses.push(CMatrix::from_real_slice(n, &values));
    }
    let tolerances = doc.tolerances.unwrap_or_default();
    SystemSpec::build(a, b, impulses, grid, tolerances, options.certify_periodicity)
}
