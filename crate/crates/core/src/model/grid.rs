use crate::error::{Error, Result};

/// Breakpoints `t_k` and arguments `zeta_k` on one fundamental period,
/// extended to all integers by `t_{k+p} = t_k + omega`, `zeta_{k+p} = zeta_k + omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgumentGrid {
    omega: f64,
    /// `t_0 = 0 < t_1 < ... < t_{p-1}`, followed by `t_p = omega`.
    times: Vec<f64>,
    args: Vec<f64>,
}

impl ArgumentGrid {
    /// `times` has `p + 1` entries starting at 0 with `times[p] <= omega`;
    /// `args` has `p` entries with `times[k] <= args[k] <= times[k + 1]`.
    ///
    /// The last interval always runs up to `omega`, which is `t_p` under the
    /// extension rule.
    pub fn new(omega: f64, times: Vec<f64>, args: Vec<f64>) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Grid {
                path: "omega".into(),
                message: format!("period must be positive and finite, got {omega}"),
            });
        }
        if times.len() < 2 {
            return Err(Error::Grid {
                path: "times".into(),
                message: "need at least two breakpoints (t_0 = 0 and t_p)".into(),
            });
        }
        let p = times.len() - 1;
        if args.len() != p {
            return Err(Error::Grid {
                path: "args".into(),
                message: format!("expected {p} arguments, found {}", args.len()),
            });
        }
        if times[0] != 0.0 {
            return Err(Error::Grid {
                path: "times[0]".into(),
                message: format!("first breakpoint must be 0, got {}", times[0]),
            });
        }
        for (k, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Grid {
                    path: format!("times[{}]", k + 1),
                    message: format!("breakpoints must be strictly increasing ({} after {})", w[1], w[0]),
                });
            }
        }
        if times[p] > omega * (1.0 + 1e-12) {
            return Err(Error::Grid {
                path: format!("times[{p}]"),
                message: format!("last breakpoint {} exceeds the period {omega}", times[p]),
            });
        }
        for (k, &z) in args.iter().enumerate() {
            if !(z >= times[k] && z <= times[k + 1]) {
                return Err(Error::Grid {
                    path: format!("args[{k}]"),
                    message: format!(
                        "argument {z} outside its interval [{}, {}]",
                        times[k],
                        times[k + 1]
                    ),
                });
            }
        }
        if times[p] < omega {
            log::warn!(
                "times[{p}] = {} < omega = {omega}: the last interval is extended to omega",
                times[p]
            );
        }
        let mut times = times;
        times[p] = omega;
        Ok(ArgumentGrid { omega, times, args })
    }

    /// Greatest-integer grid `[t]` scaled to period `omega`: `p = 1`, `zeta_0 = 0`.
    pub fn floor(omega: f64) -> Self {
        ArgumentGrid {
            omega,
            times: vec![0.0, omega],
            args: vec![0.0],
        }
    }

    pub fn period(&self) -> f64 {
        self.omega
    }

    /// Number of intervals per period.
    pub fn count(&self) -> usize {
        self.args.len()
    }

    pub fn base_times(&self) -> &[f64] {
        &self.times
    }

    pub fn base_args(&self) -> &[f64] {
        &self.args
    }

    /// Splits a global index into (local index in `0..p`, period shift).
    pub fn split(&self, k: i64) -> (usize, i64) {
        let p = self.count() as i64;
        (k.rem_euclid(p) as usize, k.div_euclid(p))
    }

    /// Global breakpoint `t_k`.
    pub fn time(&self, k: i64) -> f64 {
        let (j, m) = self.split(k);
        self.times[j] + m as f64 * self.omega
    }

    /// Global argument `zeta_k`.
    pub fn arg(&self, k: i64) -> f64 {
        let (j, m) = self.split(k);
        self.args[j] + m as f64 * self.omega
    }

    /// Index `k(t)` of the half-open interval `[t_k, t_{k+1})` holding `t`.
    pub fn interval_of(&self, t: f64) -> i64 {
        let omega = self.omega;
        let mut m = (t / omega).floor();
        let mut r = t - m * omega;
        if r >= omega {
            m += 1.0;
            r -= omega;
        } else if r < 0.0 {
            m -= 1.0;
            r += omega;
        }
        let snap = 1e-12 * t.abs().max(1.0);
        let p = self.count();
        if omega - r <= snap {
            m += 1.0;
            r = 0.0;
        }
        let mut j = self.times[..p].partition_point(|&x| x <= r) - 1;
        if j + 1 < p && self.times[j + 1] - r <= snap {
            j += 1;
        }
        m as i64 * p as i64 + j as i64
    }

    /// `(k(t), gamma(t))` with `gamma(t) = zeta_{k(t)}`.
    pub fn gamma_at(&self, t: f64) -> (i64, f64) {
        let k = self.interval_of(t);
        (k, self.arg(k))
    }

    /// True when every argument sits at the left end of its interval.
    pub fn is_retarded(&self) -> bool {
        self.args.iter().zip(&self.times).all(|(z, t)| z == t)
    }
}
