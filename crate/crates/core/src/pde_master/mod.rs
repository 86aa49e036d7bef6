//! Master-diffusion model: a mobile reactant diffusing on `[0, L]` while
//! binding to immobile sites, described by the joint density `p(x, S, t)` of
//! particle position and the local site-ladder level `S`.
//!
//! The ladder equations are integrated exactly as written, including the
//! quadratic `K₁p²` closure with `K₁ = M₀·k₁·Δx`. Because `K₁` carries `Δx`,
//! the grid-independent quantity is `K₁/Δx = M₀k₁`; refining the grid at
//! fixed site density (sites per cell scaling with `Δx`) converges.
//!
//! Level conventions follow the equations: the initial pdf sits in level 0,
//! level 1 is the state that gains from unbinding, and the bound-site moments
//! are taken from level 1.

mod boundary;
mod solver;

pub use boundary::{solve_boundary_binding, BoundaryBindingState};
pub use solver::{solve_ladder, solve_two_state, MasterProblem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Grid1D, ReactionRates, SiteDensity};

/// Output schedule for the time-stepping solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStepping {
    pub t_end: f64,
    pub dt: f64,
    /// Record every this many steps (the initial and final states are always
    /// recorded).
    pub record_every: usize,
}

impl TimeStepping {
    pub fn new(t_end: f64, dt: f64, record_every: usize) -> Result<Self> {
        let s = Self {
            t_end,
            dt,
            record_every,
        };
        s.check()?;
        Ok(s)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Stability(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Invalid(format!(
                "t_end must be >= 0, got {}",
                self.t_end
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Invalid("record_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Gridded joint density `p(x_i, S, t)`. `levels[i]` holds the levels
/// `S = 0..=S₀(x_i)` present in cell `i`; anything above `S₀(x_i)` is zero by
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialField {
    pub t: f64,
    pub grid: Grid1D,
    pub levels: Vec<Vec<f64>>,
}

impl SpatialField {
    pub fn value(&self, cell: usize, level: usize) -> f64 {
        self.levels[cell].get(level).copied().unwrap_or(0.0)
    }

    pub fn max_level(&self) -> usize {
        self.levels.iter().map(|l| l.len()).max().unwrap_or(1) - 1
    }

    /// `Σ_S ∫ p dx`.
    pub fn total_mass(&self) -> f64 {
        crate::numerics::compensated_sum(self.levels.iter().flat_map(|l| l.iter().copied()))
            * self.grid.dx
    }

    /// `∫ p(x, S, t) dx` for one level.
    pub fn level_mass(&self, level: usize) -> f64 {
        crate::numerics::compensated_sum((0..self.grid.cells).map(|i| self.value(i, level)))
            * self.grid.dx
    }

    /// `Σ_S p(x_i, S, t)` per cell.
    pub fn marginal(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.iter().sum()).collect()
    }

    /// Smallest entry over all cells and levels.
    pub fn min_value(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Moments of the bound-site count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// `S̄₀ = ∫_{Ω′} p(x, 1, t) dx`.
    pub fraction_bound: f64,
}

/// Mean, second moment and variance of the bound count, with the per-cell
/// site count `S₀(x_i)` as weight on level 1.
pub fn moments_bound(field: &SpatialField, sites: &SiteDensity) -> Result<BoundMoments> {
    sites.check_grid(&field.grid)?;
    if field.levels.len() != field.grid.cells {
        return Err(Error::LengthMismatch {
            what: "field",
            got: field.levels.len(),
            expected: field.grid.cells,
        });
    }
    let dx = field.grid.dx;
    let mut mean = 0.0;
    let mut second = 0.0;
    let mut fraction = 0.0;
    for (i, &s0) in sites.counts.iter().enumerate() {
        if s0 == 0 {
            continue;
        }
        let p1 = field.value(i, 1);
        let w = f64::from(s0);
        mean += w * p1 * dx;
        second += w * w * p1 * dx;
        fraction += p1 * dx;
    }
    if fraction > 1.0 + 1e-9 {
        return Err(Error::Invalid(format!(
            "fraction of bound sites {fraction} exceeds 1: field not normalized"
        )));
    }
    let variance = (second - mean * mean).max(0.0);
    Ok(BoundMoments {
        mean,
        second_moment: second,
        variance,
        fraction_bound: fraction,
    })
}

/// Bound-count variance when `S₀ = level` uniformly on its support:
/// `level²·S̄₀(1 − S̄₀)`.
pub fn variance_uniform_support(level: f64, fraction_bound: f64) -> f64 {
    level * level * fraction_bound * (1.0 - fraction_bound)
}

/// Steady level-1 density `c_M(x, 1)` at a point where the local site value
/// is `s0`, for reflecting walls:
///
/// `2k₋₁S₀M₀/L / (k₋₁S₀ + sqrt((k₋₁S₀)² + 4K₁k₋₁S₀/L))`.
///
/// Returns 0 outside the support. With `k₋₁ = 0` and `K₁ > 0` the limit 0 is
/// returned.
pub fn steady_cm(s0: f64, k_minus1: f64, big_k1: f64, particles: f64, length: f64) -> f64 {
    let a = k_minus1 * s0;
    if s0 <= 0.0 || a <= 0.0 {
        return 0.0;
    }
    2.0 * a * particles / length / (a + (a * a + 4.0 * big_k1 * a / length).sqrt())
}

/// [`steady_cm`] evaluated on every cell, with `K₁ = M₀k₁Δx`.
pub fn steady_cm_on_grid(
    grid: &Grid1D,
    rates: &ReactionRates,
    sites: &SiteDensity,
    particles: u32,
) -> Result<Vec<f64>> {
    sites.check_grid(grid)?;
    let m0 = f64::from(particles);
    let big_k1 = m0 * rates.k1 * grid.dx;
    Ok(sites
        .counts
        .iter()
        .map(|&s| steady_cm(f64::from(s), rates.k_minus1, big_k1, m0, grid.length))
        .collect())
}

/// `ρ = M₀k₁Δx / (N_S k₋₁)`.
pub fn binding_ratio(particles: f64, k1: f64, dx: f64, total_sites: f64, k_minus1: f64) -> f64 {
    particles * k1 * dx / (total_sites * k_minus1)
}

/// Steady fraction `p_M = 2 / (1 + sqrt(1 + 4ρ))`.
pub fn fraction_bound(rho: f64) -> f64 {
    2.0 / (1.0 + (1.0 + 4.0 * rho).sqrt())
}

/// Large-ρ asymptote `sqrt(1/ρ)` of [`fraction_bound`].
pub fn fraction_bound_asymptote(rho: f64) -> f64 {
    (1.0 / rho).sqrt()
}

/// `σ²_S = p_M(1 − p_M)`.
pub fn variance_bound(rho: f64) -> f64 {
    let p = fraction_bound(rho);
    p * (1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fraction_bound_closed_forms() {
        assert_eq!(fraction_bound(0.0), 1.0);
        assert!((fraction_bound(2.0) - 0.5).abs() < 1e-15);
        assert!((fraction_bound(6.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((fraction_bound_asymptote(1e8) / fraction_bound(1e8) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn variance_bound_values() {
        assert_eq!(variance_bound(0.0), 0.0);
        assert!(variance_bound(1e12) < 1e-5);
        assert!((variance_bound(2.0) - 0.25).abs() < 1e-15);
        assert!((variance_bound(6.0) - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn variance_peak_sits_at_half_bound() {
        let step = 0.01;
        let rhos: Vec<f64> = (0..2000).map(|i| i as f64 * step).collect();
        let values: Vec<f64> = rhos.iter().map(|&r| variance_bound(r)).collect();
        let idx = crate::curves::argmax_leftmost(&values).unwrap();
        assert!((rhos[idx] - 2.0).abs() <= step);
        assert!(values[idx] <= 0.25);
    }

    #[test]
    fn steady_cm_limits() {
        // k_-1 -> 0
        assert!(steady_cm(1.0, 1e-14, 1.0, 10.0, 1.0) < 1e-5);
        // K_1 -> 0
        assert!((steady_cm(1.0, 2.0, 0.0, 10.0, 2.0) - 5.0).abs() < 1e-14);
        assert_eq!(steady_cm(0.0, 2.0, 1.0, 10.0, 2.0), 0.0);
    }

    fn field_with_level1(grid: &Grid1D, p1: &[f64]) -> SpatialField {
        SpatialField {
            t: 0.0,
            grid: grid.clone(),
            levels: p1.iter().map(|&v| vec![1.0 / grid.length - v, v]).collect(),
        }
    }

    #[test]
    fn moments_of_empty_and_half_bound() {
        let grid = Grid1D::new(1.0, 10).unwrap();
        let sites = SiteDensity::uniform(&grid, 1);
        let m = moments_bound(&field_with_level1(&grid, &[0.0; 10]), &sites).unwrap();
        assert_eq!(m.variance, 0.0);
        assert_eq!(m.fraction_bound, 0.0);

        let m = moments_bound(&field_with_level1(&grid, &[0.5; 10]), &sites).unwrap();
        assert!((m.fraction_bound - 0.5).abs() < 1e-14);
        assert!((m.variance - 0.25).abs() < 1e-14);
    }

    #[test]
    fn moments_reject_mismatched_grid() {
        let grid = Grid1D::new(1.0, 10).unwrap();
        let other = SiteDensity::uniform(&Grid1D::new(1.0, 12).unwrap(), 1);
        assert!(moments_bound(&field_with_level1(&grid, &[0.1; 10]), &other).is_err());
    }

    proptest! {
        // general weighted formula agrees with the uniform-support formula
        #[test]
        fn weighted_moments_match_uniform_support(
            level in 1u32..6,
            start in 0usize..10, len in 1usize..10,
            p1 in proptest::collection::vec(0.0f64..0.05, 20),
        ) {
            let grid = Grid1D::new(1.0, 20).unwrap();
            let end = (start + len).min(20);
            let sites = SiteDensity::on_cells(&grid, level, start..end);
            let field = SpatialField {
                t: 0.0,
                grid: grid.clone(),
                levels: p1.iter().map(|&v| vec![0.0, v]).collect(),
            };
            let m = moments_bound(&field, &sites).unwrap();
            let expected = variance_uniform_support(f64::from(level), m.fraction_bound);
            prop_assert!((m.variance - expected).abs() < 1e-12);
        }
    }
}
