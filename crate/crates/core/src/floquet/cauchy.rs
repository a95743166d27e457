use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::SystemSpec;
use crate::transition::{e_matrices, interval_operators, IntervalOperators};

/// Cauchy matrix `X(t) = W(t, 0)` of one system, assembled from the cached
/// interval anchors.
///
/// On interval `k = m p + j` the matrix is
/// `E(t - m omega, zeta_j) E(t_j, zeta_j)^{-1} S_{j-1} ... S_0 X(omega)^m`
/// with step matrices `S_j = (I + C_{j+1}) E(t_{j+1}, zeta_j) E(t_j, zeta_j)^{-1}`.
#[derive(Clone, Debug)]
pub struct Propagator<'a> {
    spec: &'a SystemSpec,
    intervals: Vec<IntervalOperators>,
    steps: Vec<CMatrix>,
    prefix: Vec<CMatrix>,
    monodromy_inv: Option<CMatrix>,
}

impl<'a> Propagator<'a> {
    pub fn new(spec: &'a SystemSpec) -> Result<Self> {
        let intervals = interval_operators(spec)?;
        let steps: Vec<CMatrix> = intervals
            .iter()
            .map(|op| spec.jump(op.k as i64 + 1) * &op.transfer())
            .collect();
        let mut prefix = Vec::with_capacity(steps.len() + 1);
        prefix.push(CMatrix::identity(spec.dim()));
        for s in &steps {
            let next = s * prefix.last().expect("nonempty");
            prefix.push(next);
        }
        let monodromy_inv = prefix.last().expect("nonempty").inv().ok();
        Ok(Propagator {
            spec,
            intervals,
            steps,
            prefix,
            monodromy_inv,
        })
    }

    pub fn spec(&self) -> &'a SystemSpec {
        self.spec
    }

    pub fn intervals(&self) -> &[IntervalOperators] {
        &self.intervals
    }

    /// `S_j` for `0 <= j < p`.
    pub fn steps(&self) -> &[CMatrix] {
        &self.steps
    }

    /// `X(omega)`.
    pub fn monodromy(&self) -> &CMatrix {
        self.prefix.last().expect("nonempty")
    }

    fn monodromy_power(&self, m: i64) -> Result<CMatrix> {
        if m >= 0 {
            Ok(self.monodromy().pow(m as u32))
        } else {
            let inv = self
                .monodromy_inv
                .as_ref()
                .ok_or_else(|| Error::Singular("monodromy matrix is singular".into()))?;
            Ok(inv.pow((-m) as u32))
        }
    }

    /// Post-impulse value `X(t_k)`.
    pub fn at_breakpoint(&self, k: i64) -> Result<CMatrix> {
        let (j, m) = self.spec.grid().split(k);
        Ok(&self.prefix[j] * &self.monodromy_power(m)?)
    }

    /// Left limit `X(t_k^-)`.
    pub fn left_limit(&self, k: i64) -> Result<CMatrix> {
        let t = self.spec.grid().time(k);
        self.on_interval(k - 1, t)
    }

    /// Continuous branch of interval `k` evaluated at `t` in the closed
    /// interval `[t_k, t_{k+1}]`; at `t_{k+1}` this is the left limit.
    pub fn on_interval(&self, k: i64, t: f64) -> Result<CMatrix> {
        Ok(self.on_interval_many(k, &[t])?.remove(0))
    }

    pub fn on_interval_many(&self, k: i64, times: &[f64]) -> Result<Vec<CMatrix>> {
        let grid = self.spec.grid();
        let (j, m) = grid.split(k);
        let shift = m as f64 * grid.period();
        let op = &self.intervals[j];
        let base = &op.e_start_inv * &self.at_breakpoint(k)?;
        let local: Vec<f64> = times.iter().map(|t| t - shift).collect();
        // exact anchors need no integration
        let pending: Vec<f64> = local.iter().copied().filter(|&t| t != op.t_start).collect();
        let mut integrated = e_matrices(self.spec, op.zeta, &pending)?.into_iter();
        Ok(local
            .iter()
            .map(|&t| {
                if t == op.t_start {
                    &op.e_start * &base
                } else {
                    &integrated.next().expect("one per time") * &base
                }
            })
            .collect())
    }

    /// `X(t)`, right-continuous at breakpoints.
    pub fn at(&self, t: f64) -> Result<CMatrix> {
        let k = self.spec.grid().interval_of(t);
        if t == self.spec.grid().time(k) {
            return self.at_breakpoint(k);
        }
        self.on_interval(k, t)
    }

    /// `X(t)` at many times; intervals are processed in parallel.
    pub fn at_many(&self, times: &[f64]) -> Result<Vec<CMatrix>> {
        let grid = self.spec.grid();
        let mut groups: Vec<(i64, Vec<usize>)> = Vec::new();
        for (i, &t) in times.iter().enumerate() {
            let k = grid.interval_of(t);
            match groups.iter_mut().find(|g| g.0 == k) {
                Some(g) => g.1.push(i),
                None => groups.push((k, vec![i])),
            }
        }
        let evaluated: Vec<(Vec<usize>, Vec<CMatrix>)> = groups
            .into_par_iter()
            .map(|(k, idx)| {
                let ts: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
                let values = self.on_interval_many(k, &ts)?;
                Ok((idx, values))
            })
            .collect::<Result<_>>()?;
        let mut out = vec![CMatrix::zeros(self.spec.dim()); times.len()];
        for (idx, values) in evaluated {
            for (i, v) in idx.into_iter().zip(values) {
                out[i] = v;
            }
        }
        Ok(out)
    }
}

/// `W(t, 0)`.
pub fn cauchy_matrix(spec: &SystemSpec, t: f64) -> Result<CMatrix> {
    Propagator::new(spec)?.at(t)
}

/// `X(omega) = prod_{r=1}^{p} (I + C_r) E(t_r, zeta_{r-1}) E(t_{r-1}, zeta_{r-1})^{-1}`,
/// accumulated left-multiplicatively.
pub fn monodromy(spec: &SystemSpec) -> Result<CMatrix> {
    Ok(Propagator::new(spec)?.monodromy().clone())
}
