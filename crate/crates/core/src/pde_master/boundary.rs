//! Binding sites concentrated on the left wall of `[0, L]`.
//!
//! The wall flux `k₁c(0)(S₀ − S_b) − k₋₁S_b` is exchanged with the first
//! cell. Over one step the cell mass plus `S_b` is fixed, which makes the
//! exchange a scalar Riccati equation that is integrated exactly. The site
//! ladder `P_k` is driven by the mean-field binding propensity
//! `k₁c(0)(S₀ − S_b)` and integrated with RK4 sub-steps.

use serde::{Deserialize, Serialize};

use super::TimeStepping;
use crate::error::{Error, Result};
use crate::numerics::{riccati_step, Tridiagonal};
use crate::params::{check_positive, Grid1D, InitialDistribution, ReactionRates, Validate};

const LADDER_LEAK_TOL: f64 = 1e-8;
const CONSERVATION_TOL: f64 = 1e-8;

/// Snapshot of the boundary-binding model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBindingState {
    pub t: f64,
    /// Interior density `c(x_i, t)` (particles per length).
    pub density: Vec<f64>,
    /// Mean-field bound count `S_b(t)`.
    pub bound: f64,
    /// `P_k(t)`, `k = 0..=S₀`.
    pub ladder: Vec<f64>,
    /// `Σ k P_k`.
    pub mean: f64,
    /// `Σ k² P_k − (Σ k P_k)²`.
    pub variance: f64,
}

impl BoundaryBindingState {
    fn new(t: f64, density: &[f64], bound: f64, ladder: &[f64]) -> Self {
        let mean: f64 = ladder.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let second: f64 = ladder
            .iter()
            .enumerate()
            .map(|(k, p)| (k * k) as f64 * p)
            .sum();
        Self {
            t,
            density: density.to_vec(),
            bound,
            ladder: ladder.to_vec(),
            mean,
            variance: (second - mean * mean).max(0.0),
        }
    }

    /// `∫c dx + S_b`.
    pub fn total(&self, dx: f64) -> f64 {
        self.density.iter().sum::<f64>() * dx + self.bound
    }
}

/// Integrates the boundary-binding model with `sites` binding sites at
/// `x = 0` and a reflecting wall at `x = L`.
pub fn solve_boundary_binding(
    grid: &Grid1D,
    diffusion: f64,
    rates: &ReactionRates,
    sites: u32,
    initial: &InitialDistribution,
    stepping: TimeStepping,
) -> Result<Vec<BoundaryBindingState>> {
    grid.validate()?;
    check_positive("diffusion", diffusion)?;
    rates.validate()?;
    initial.validate()?;
    initial.check_grid(grid)?;
    stepping.check()?;

    let n = grid.cells;
    let dx = grid.dx;
    let dt = stepping.dt;
    let m0 = f64::from(initial.particles);
    let s0 = f64::from(sites);
    let (k1, km1) = (rates.k1, rates.k_minus1);

    let r = diffusion * 0.5 * dt / (dx * dx);
    let lower: Vec<f64> = (0..n).map(|i| if i > 0 { -r } else { 0.0 }).collect();
    let upper: Vec<f64> = (0..n).map(|i| if i + 1 < n { -r } else { 0.0 }).collect();
    let diag: Vec<f64> = (0..n)
        .map(|i| 1.0 + r * (usize::from(i > 0) + usize::from(i + 1 < n)) as f64)
        .collect();
    let diffuse = Tridiagonal::factor(&lower, &diag, &upper);

    let mut c: Vec<f64> = initial.density.iter().map(|v| v * m0).collect();
    let mut bound = 0.0;
    let mut ladder = vec![0.0; sites as usize + 1];
    ladder[0] = 1.0;
    let mut work = LadderWork::new(sites as usize);

    let steps = stepping.steps();
    let mut out = vec![BoundaryBindingState::new(0.0, &c, bound, &ladder)];
    for step in 1..=steps {
        diffuse.solve_in_place(&mut c);

        let beta_start = k1 * c[0] * (s0 - bound);
        // local mass T = c0·Δx + S_b is frozen during the exchange
        let total = c[0] * dx + bound;
        let a = k1 / dx;
        bound = riccati_step(bound, a * total * s0, -a * (total + s0) - km1, a, dt)
            .clamp(0.0, s0.min(total));
        c[0] = (total - bound) / dx;
        let beta_end = k1 * c[0] * (s0 - bound);

        work.advance(&mut ladder, 0.5 * (beta_start + beta_end), km1, dt);
        let leak = (ladder.iter().sum::<f64>() - 1.0).abs();
        if leak > LADDER_LEAK_TOL {
            return Err(Error::ProbabilityLeak { leak });
        }

        diffuse.solve_in_place(&mut c);

        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Stability("non-finite interior density".into()));
        }
        if let Some((cell, &value)) = c
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -1e-12 * m0.max(1.0))
        {
            return Err(Error::NegativeDensity {
                cell,
                level: 0,
                value,
            });
        }
        let drift = (c.iter().sum::<f64>() * dx + bound - m0).abs();
        if drift > CONSERVATION_TOL * m0.max(1.0) {
            return Err(Error::Stability(format!(
                "particle count drifted by {drift:e}"
            )));
        }
        if step % stepping.record_every == 0 || step == steps {
            out.push(BoundaryBindingState::new(
                step as f64 * dt,
                &c,
                bound,
                &ladder,
            ));
        }
    }
    Ok(out)
}

struct LadderWork {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl LadderWork {
    fn new(sites: usize) -> Self {
        let z = vec![0.0; sites + 1];
        Self {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
        }
    }

    fn rhs(p: &[f64], beta: f64, km1: f64, out: &mut [f64]) {
        let top = p.len() - 1;
        for k in 0..=top {
            let mut v = -(k as f64) * km1 * p[k];
            if k < top {
                v -= beta * p[k];
                v += (k + 1) as f64 * km1 * p[k + 1];
            }
            if k > 0 {
                v += beta * p[k - 1];
            }
            out[k] = v;
        }
    }

    fn advance(&mut self, p: &mut [f64], beta: f64, km1: f64, dt: f64) {
        let max_rate = beta + km1 * (p.len() - 1) as f64;
        let subs = ((dt * max_rate / 0.5).ceil() as usize).max(1);
        let h = dt / subs as f64;
        for _ in 0..subs {
            Self::rhs(p, beta, km1, &mut self.k[0]);
            for stage in 1..4 {
                let w = if stage == 3 { h } else { 0.5 * h };
                for i in 0..p.len() {
                    self.tmp[i] = p[i] + w * self.k[stage - 1][i];
                }
                Self::rhs(&self.tmp, beta, km1, &mut self.k[stage]);
            }
            for i in 0..p.len() {
                p[i] += h / 6.0
                    * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(k1: f64, km1: f64) -> (Grid1D, ReactionRates, InitialDistribution) {
        let grid = Grid1D::new(1.0, 40).unwrap();
        let init = InitialDistribution::uniform(&grid, 30);
        let rates = ReactionRates {
            k1,
            k_minus1: km1,
            ..Default::default()
        };
        (grid, rates, init)
    }

    #[test]
    fn no_binding_keeps_sites_empty() {
        let (grid, rates, init) = setup(0.0, 1.0);
        let out = solve_boundary_binding(
            &grid,
            1.0,
            &rates,
            5,
            &init,
            TimeStepping::new(1.0, 1e-2, 10).unwrap(),
        )
        .unwrap();
        for s in &out {
            assert_eq!(s.bound, 0.0);
            assert!((s.ladder[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn steady_state_balances_wall_flux() {
        let (grid, rates, init) = setup(0.4, 2.0);
        let out = solve_boundary_binding(
            &grid,
            1.0,
            &rates,
            8,
            &init,
            TimeStepping::new(10.0, 1e-3, 1000).unwrap(),
        )
        .unwrap();
        let last = out.last().unwrap();
        let c0 = last.density[0];
        let expected = 0.4 * c0 * 8.0 / (0.4 * c0 + 2.0);
        assert!((last.bound - expected).abs() < 1e-6 * expected);
        for s in &out {
            assert!((s.total(grid.dx) - 30.0).abs() < 1e-8 * 30.0);
            assert!((s.ladder.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(s.bound <= 8.0 && s.bound >= 0.0);
        }
    }
}
