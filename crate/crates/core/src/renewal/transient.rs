//! Volterra renewal equations for the first two moments of the surviving
//! count with exponential inter-injection times `f(s) = γe^{−γs}`:
//!
//! `EN(t)  = S(t) + ∫₀ᵗ f(s) EN(t−s) ds`
//! `EN²(t) = ∫₀ᵗ f(s) EN²(t−s) ds + S(t) + 2S(t) ∫₀ᵗ f(s) EN(t−s) ds`
//!
//! The convolutions are product-trapezoidal: the unknown is interpolated
//! linearly between nodes and integrated exactly against the exponential
//! kernel. Because the kernel is exponential the history integral obeys a
//! one-step recursion, so a solve is O(n). Accuracy is checked by repeating
//! the solve at half the step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::check_rate;

/// Relative tolerance on the step-halving error estimate used by the free
/// functions.
pub const DEFAULT_RENEWAL_TOLERANCE: f64 = 1e-6;

/// Moment curves on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStats {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// Step-halving error estimate of `mean`.
    pub error_estimate: f64,
}

impl CountStats {
    pub fn variance(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.second_moment)
            .map(|(m, s)| s - m * m)
            .collect()
    }
}

/// Grid and tolerance for the renewal solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalSolver {
    pub gamma: f64,
    pub t_end: f64,
    pub dt: f64,
    pub tolerance: f64,
}

struct Weights {
    decay: f64,
    w_prev: f64,
    w_curr: f64,
}

impl Weights {
    fn new(gamma: f64, h: f64) -> Self {
        if gamma == 0.0 {
            return Self {
                decay: 1.0,
                w_prev: 0.0,
                w_curr: 0.0,
            };
        }
        let x = gamma * h;
        let decay = (-x).exp();
        let ratio = -(-x).exp_m1() / x; // (1 − e^{−x})/x
        Self {
            decay,
            w_prev: ratio - decay,
            w_curr: 1.0 - ratio,
        }
    }
}

impl RenewalSolver {
    pub fn new(gamma: f64, t_end: f64, dt: f64) -> Result<Self> {
        let s = Self {
            gamma,
            t_end,
            dt,
            tolerance: DEFAULT_RENEWAL_TOLERANCE,
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        check_rate("gamma", self.gamma)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::NonPositive {
                name: "dt",
                value: self.dt,
            });
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::Invalid(format!(
                "t_end ({}) must be at least one step ({})",
                self.t_end, self.dt
            )));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Solves both equations on a grid of `n` steps of size `h`. Returns
    /// `(EN, EN²)`.
    fn solve_grid(&self, survival: &dyn Fn(f64) -> f64, n: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
        let w = Weights::new(self.gamma, h);
        let mut en = Vec::with_capacity(n + 1);
        let mut en2 = Vec::with_capacity(n + 1);
        let s0 = survival(0.0);
        en.push(s0);
        en2.push(s0);
        let mut hist = 0.0; // ∫ f(t−u) EN(u) du
        let mut hist2 = 0.0; // ∫ f(t−u) EN²(u) du
        for i in 1..=n {
            let s = survival(i as f64 * h);
            let base = w.decay * hist + w.w_prev * en[i - 1];
            let m = (s + base) / (1.0 - w.w_curr);
            hist = base + w.w_curr * m;
            let base2 = w.decay * hist2 + w.w_prev * en2[i - 1];
            let m2 = (s + 2.0 * s * hist + base2) / (1.0 - w.w_curr);
            hist2 = base2 + w.w_curr * m2;
            en.push(m);
            en2.push(m2);
        }
        (en, en2)
    }

    /// Solves at `dt` and `dt/2`; fails with [`Error::StepTooCoarse`] when the
    /// two disagree by more than `tolerance·max(1, max EN)`.
    pub fn solve(&self, survival: &dyn Fn(f64) -> f64) -> Result<CountStats> {
        self.check()?;
        let n = self.steps();
        let h = self.t_end / n as f64;
        let (coarse, coarse2) = self.solve_grid(survival, n, h);
        let (fine, fine2) = self.solve_grid(survival, 2 * n, 0.5 * h);
        let mut estimate = 0.0f64;
        for i in 0..=n {
            estimate = estimate
                .max((coarse[i] - fine[2 * i]).abs())
                .max((coarse2[i] - fine2[2 * i]).abs() / coarse2[i].abs().max(1.0));
        }
        let scale = coarse.iter().copied().fold(1.0, f64::max);
        let tolerance = self.tolerance * scale;
        if estimate > tolerance {
            return Err(Error::StepTooCoarse {
                estimate,
                tolerance,
            });
        }
        Ok(CountStats {
            t: (0..=n).map(|i| i as f64 * h).collect(),
            mean: coarse,
            second_moment: coarse2,
            error_estimate: estimate,
        })
    }
}

fn check_survival(survival: &dyn Fn(f64) -> f64) -> Result<()> {
    let s0 = survival(0.0);
    if (s0 - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "survival must start at 1, got {s0}"
        )));
    }
    Ok(())
}

/// `EN(t)` for a survival function `S` with `S(0) = 1`.
pub fn mean_transient(
    survival: &dyn Fn(f64) -> f64,
    gamma: f64,
    t_end: f64,
    dt: f64,
) -> Result<CountStats> {
    check_survival(survival)?;
    RenewalSolver::new(gamma, t_end, dt)?.solve(survival)
}

/// `EN²(t)`; also returns `EN(t)`, which the second-moment equation needs.
/// `mean` must come from [`mean_transient`] on the same grid.
pub fn second_moment_transient(
    survival: &dyn Fn(f64) -> f64,
    mean: &CountStats,
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = mean.t.len() - 1;
    let t_end = *mean.t.last().unwrap_or(&0.0);
    check_survival(survival)?;
    let solver = RenewalSolver::new(gamma, t_end, t_end / n as f64)?;
    Ok(solver.solve(survival)?.second_moment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_killing_grows_linearly() {
        let gamma = 2.5;
        let out = mean_transient(&|_| 1.0, gamma, 10.0 / gamma, 1e-3).unwrap();
        for (t, m) in out.t.iter().zip(&out.mean) {
            assert!((m - (1.0 + gamma * t)).abs() < 1e-9);
        }
    }

    #[test]
    fn no_injection_is_survival() {
        let s = |t: f64| (-0.7 * t).exp() * (1.0 + 0.1 * (3.0 * t).sin());
        let out = mean_transient(&s, 0.0, 5.0, 1e-2).unwrap();
        for (t, m) in out.t.iter().zip(&out.mean) {
            assert!((m - s(*t)).abs() < 1e-14);
        }
        for (t, m2) in out.t.iter().zip(&out.second_moment) {
            assert!((m2 - s(*t)).abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_survival_gives_poisson_counts() {
        // M/M/∞ started from one particle: EN = γ/α + (1 − γ/α)e^{−αt}
        let (gamma, alpha) = (3.0, 0.8);
        let out = mean_transient(&|t| (-alpha * t).exp(), gamma, 30.0, 2e-3).unwrap();
        let oracle = |t: f64| gamma / alpha + (1.0 - gamma / alpha) * (-alpha * t).exp();
        for (t, m) in out.t.iter().zip(&out.mean) {
            assert!((m - oracle(*t)).abs() < 1e-5);
        }
        let last = out.mean.len() - 1;
        assert!((out.mean[last] - gamma / alpha).abs() < 1e-4);
        let var = out.variance()[last];
        assert!((var - gamma / alpha).abs() < 1e-3);
        assert!(out.variance().iter().all(|v| *v >= -1e-9));
    }

    #[test]
    fn coarse_step_is_reported() {
        let s = |t: f64| (-5.0 * t).exp() * (20.0 * t).cos().abs();
        let err = mean_transient(&s, 4.0, 2.0, 0.2).unwrap_err();
        assert!(matches!(err, Error::StepTooCoarse { .. }));
    }

    #[test]
    fn survival_must_start_at_one() {
        assert!(mean_transient(&|_| 0.5, 1.0, 1.0, 0.1).is_err());
    }
}
