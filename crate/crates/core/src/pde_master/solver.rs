//! Strang-split integrator for the two-state and full-ladder systems.
//!
//! Each step is: implicit diffusion over `dt/2`, local reaction over `dt`,
//! implicit diffusion over `dt/2`. The reaction step is exact for cells with
//! at most one site (a scalar Riccati equation, since `p₀ + p₁` is frozen by
//! the reaction) and backward Euler with Newton iterations otherwise. Both
//! conserve the per-cell level sum, so the marginal is moved by diffusion
//! alone and total mass drifts only at round-off level.

use serde::{Deserialize, Serialize};

use super::{SpatialField, TimeStepping};
use crate::error::{Error, Result};
use crate::numerics::{riccati_step, Tridiagonal};
use crate::params::{
    check_positive, BoundaryCondition, Grid1D, InitialDistribution, ReactionRates, SiteDensity,
    Validate, Wall,
};

const NEGATIVE_FLOOR: f64 = -1e-12;
const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 60;

/// Everything a master-diffusion solve needs besides the time schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterProblem {
    pub grid: Grid1D,
    pub diffusion: f64,
    pub rates: ReactionRates,
    pub sites: SiteDensity,
    pub initial: InitialDistribution,
    #[serde(default)]
    pub boundary: BoundaryCondition,
}

impl MasterProblem {
    /// `K₁ = M₀·k₁·Δx`.
    pub fn big_k1(&self) -> f64 {
        f64::from(self.initial.particles) * self.rates.k1 * self.grid.dx
    }
}

impl Validate for MasterProblem {
    fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        check_positive("diffusion", self.diffusion)?;
        self.rates.validate()?;
        self.sites.validate()?;
        self.sites.check_grid(&self.grid)?;
        self.initial.validate()?;
        self.initial.check_grid(&self.grid)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    TwoState,
    Ladder,
}

/// Two-state system: level 0 holds the initial pdf, level 1 starts empty. A
/// cell with `S₀ > 1` enters the reaction through the weight `k₋₁S₀(x)`.
pub fn solve_two_state(
    problem: &MasterProblem,
    stepping: TimeStepping,
) -> Result<Vec<SpatialField>> {
    integrate(problem, stepping, Mode::TwoState)
}

/// Full ladder `S = 0..=S₀(x)` with the quadratic binding terms.
pub fn solve_ladder(problem: &MasterProblem, stepping: TimeStepping) -> Result<Vec<SpatialField>> {
    integrate(problem, stepping, Mode::Ladder)
}

struct Diffuser {
    /// One factored operator per level (`None` where the level is absent
    /// everywhere).
    levels: Vec<Option<(Tridiagonal, Vec<bool>)>>,
}

impl Diffuser {
    fn new(grid: &Grid1D, diffusion: f64, dt: f64, bc: BoundaryCondition, depth: &[usize]) -> Self {
        let n = grid.cells;
        let r = diffusion * dt / (grid.dx * grid.dx);
        let top = depth.iter().copied().max().unwrap_or(1);
        let levels = (0..top)
            .map(|level| {
                let present: Vec<bool> = depth.iter().map(|&d| d > level).collect();
                if !present.iter().any(|&p| p) {
                    return None;
                }
                let mut lower = vec![0.0; n];
                let mut diag = vec![1.0; n];
                let mut upper = vec![0.0; n];
                for i in 0..n {
                    if !present[i] {
                        continue;
                    }
                    if i > 0 && present[i - 1] {
                        lower[i] = -r;
                        diag[i] += r;
                    }
                    if i + 1 < n && present[i + 1] {
                        upper[i] = -r;
                        diag[i] += r;
                    }
                }
                if present[0] && bc.left == Wall::Absorbing {
                    diag[0] += 2.0 * r;
                }
                if present[n - 1] && bc.right == Wall::Absorbing {
                    diag[n - 1] += 2.0 * r;
                }
                Some((Tridiagonal::factor(&lower, &diag, &upper), present))
            })
            .collect();
        Self { levels }
    }

    fn apply(&self, field: &mut [Vec<f64>], scratch: &mut [f64]) {
        for (level, op) in self.levels.iter().enumerate() {
            let Some((op, present)) = op else { continue };
            for (i, cell) in field.iter().enumerate() {
                scratch[i] = if present[i] { cell[level] } else { 0.0 };
            }
            op.solve_in_place(scratch);
            for (i, cell) in field.iter_mut().enumerate() {
                if present[i] {
                    cell[level] = scratch[i];
                }
            }
        }
    }
}

fn integrate(
    problem: &MasterProblem,
    stepping: TimeStepping,
    mode: Mode,
) -> Result<Vec<SpatialField>> {
    problem.validate()?;
    stepping.check()?;
    let grid = &problem.grid;
    let sites = &problem.sites.counts;
    let depth: Vec<usize> = sites
        .iter()
        .map(|&s| match mode {
            Mode::TwoState => {
                if s > 0 {
                    2
                } else {
                    1
                }
            }
            Mode::Ladder => s as usize + 1,
        })
        .collect();

    let mut levels: Vec<Vec<f64>> = problem
        .initial
        .density
        .iter()
        .zip(&depth)
        .map(|(&m, &d)| {
            let mut v = vec![0.0; d];
            v[0] = m;
            v
        })
        .collect();

    let dt = stepping.dt;
    let steps = stepping.steps();
    let diffuser = Diffuser::new(grid, problem.diffusion, 0.5 * dt, problem.boundary, &depth);
    let no_reaction = problem.sites.total() == 0;
    let big_k1 = problem.big_k1();
    let k_minus1 = problem.rates.k_minus1;

    let snapshot = |t: f64, levels: &Vec<Vec<f64>>| SpatialField {
        t,
        grid: grid.clone(),
        levels: levels.clone(),
    };
    let mut out = vec![snapshot(0.0, &levels)];
    let mut scratch = vec![0.0; grid.cells];
    let mut newton = LadderNewton::default();

    for step in 1..=steps {
        diffuser.apply(&mut levels, &mut scratch);
        if !no_reaction {
            for (i, cell) in levels.iter_mut().enumerate() {
                let s0 = sites[i];
                if s0 == 0 {
                    continue;
                }
                if mode == Mode::TwoState || s0 == 1 {
                    let weight = k_minus1 * f64::from(s0);
                    let total = cell[0] + cell[1];
                    let p1 = riccati_step(cell[1], weight * total, -weight, -big_k1, dt);
                    cell[1] = p1;
                    cell[0] = total - p1;
                } else {
                    newton.step(cell, s0 as usize, big_k1, k_minus1, dt)?;
                }
            }
        }
        diffuser.apply(&mut levels, &mut scratch);

        check_positive_field(&levels)?;
        if step % stepping.record_every == 0 || step == steps {
            out.push(snapshot(step as f64 * dt, &levels));
        }
    }
    Ok(out)
}

fn check_positive_field(levels: &[Vec<f64>]) -> Result<()> {
    for (cell, values) in levels.iter().enumerate() {
        for (level, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::Stability(format!(
                    "non-finite density at cell {cell}, level {level}"
                )));
            }
            if value < NEGATIVE_FLOOR {
                return Err(Error::NegativeDensity { cell, level, value });
            }
        }
    }
    Ok(())
}

/// Ladder reaction right-hand side for one cell with `m` sites.
pub(crate) fn ladder_rhs(p: &[f64], big_k1: f64, k_minus1: f64, out: &mut [f64]) {
    let m = p.len() - 1;
    for s in 0..=m {
        let sf = s as f64;
        let mut v = -big_k1 * sf * p[s] * p[s] - k_minus1 * (m - s) as f64 * p[s];
        if s < m {
            v += big_k1 * (sf + 1.0) * p[s + 1] * p[s + 1];
        }
        if s > 0 {
            v += k_minus1 * (m - s + 1) as f64 * p[s - 1];
        }
        out[s] = v;
    }
}

#[derive(Default)]
struct LadderNewton {
    rhs: Vec<f64>,
    residual: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    old: Vec<f64>,
}

impl LadderNewton {
    /// Backward Euler `p − p_old − dt·f(p) = 0` solved by Newton. The
    /// Jacobian is tridiagonal in `S` and its columns sum to zero, so every
    /// iterate keeps the level sum of `p_old`.
    fn step(&mut self, p: &mut [f64], m: usize, big_k1: f64, k_minus1: f64, dt: f64) -> Result<()> {
        let n = m + 1;
        for v in [
            &mut self.rhs,
            &mut self.residual,
            &mut self.lower,
            &mut self.diag,
            &mut self.upper,
        ] {
            v.resize(n, 0.0);
        }
        self.old.clear();
        self.old.extend_from_slice(p);
        let scale = self.old.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        for _ in 0..NEWTON_MAX_ITER {
            ladder_rhs(p, big_k1, k_minus1, &mut self.rhs);
            let mut norm = 0.0f64;
            for s in 0..n {
                self.residual[s] = -(p[s] - self.old[s] - dt * self.rhs[s]);
                norm = norm.max(self.residual[s].abs());
            }
            if norm <= NEWTON_TOL * scale {
                return Ok(());
            }
            for s in 0..n {
                let sf = s as f64;
                self.diag[s] = 1.0 - dt * (-2.0 * big_k1 * sf * p[s] - k_minus1 * (m - s) as f64);
                self.upper[s] = if s < m {
                    -dt * 2.0 * big_k1 * (sf + 1.0) * p[s + 1]
                } else {
                    0.0
                };
                self.lower[s] = if s > 0 {
                    -dt * k_minus1 * (m - s + 1) as f64
                } else {
                    0.0
                };
            }
            Tridiagonal::factor(&self.lower, &self.diag, &self.upper)
                .solve_in_place(&mut self.residual);
            for s in 0..n {
                p[s] += self.residual[s];
            }
        }
        ladder_rhs(p, big_k1, k_minus1, &mut self.rhs);
        let norm = (0..n)
            .map(|s| (p[s] - self.old[s] - dt * self.rhs[s]).abs())
            .fold(0.0, f64::max);
        if norm <= 1e-10 * scale {
            Ok(())
        } else {
            Err(Error::Stability(format!(
                "ladder reaction step did not converge (residual {norm:e}); reduce dt"
            )))
        }
    }
}
