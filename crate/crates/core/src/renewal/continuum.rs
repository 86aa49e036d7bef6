use serde::{Deserialize, Serialize};

use super::PushPullParams;
use crate::error::{Error, Result};
use crate::params::Validate;

/// Steady continuum density with uniform production `γ` per unit length and
/// time and a point sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumProfile {
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    /// Closed-form total `N₀ = ∫c dx`.
    pub total: f64,
}

/// `c(x) = γ[Lθ(x − x₁)/D − x²/(2D) + L/k₁ + x₁²/(2D)]`, `θ(u) = max(u, 0)`,
/// sampled at `points` equally spaced positions. Here `γ` is read per unit
/// length; the injection field of `params` is ignored.
pub fn continuum_profile(params: &PushPullParams, points: usize) -> Result<ContinuumProfile> {
    params.validate()?;
    if params.k1 <= 0.0 {
        return Err(Error::NonPositive {
            name: "k1",
            value: params.k1,
        });
    }
    if points < 2 {
        return Err(Error::TooFewCells(points));
    }
    let (l, d) = (params.interval.length, params.interval.diffusion);
    let (g, k, x1) = (params.gamma, params.k1, params.sink);
    let x: Vec<f64> = (0..points)
        .map(|i| l * i as f64 / (points - 1) as f64)
        .collect();
    let c = x
        .iter()
        .map(|&x| continuum_density(x, l, d, g, k, x1))
        .collect();
    let total = g * l * (l - x1).powi(2) / (2.0 * d) - g * l.powi(3) / (6.0 * d)
        + g * l * (l / k + x1 * x1 / (2.0 * d));
    Ok(ContinuumProfile { x, c, total })
}

pub(crate) fn continuum_density(x: f64, l: f64, d: f64, gamma: f64, k1: f64, x1: f64) -> f64 {
    gamma * (l * (x - x1).max(0.0) / d - x * x / (2.0 * d) + l / k1 + x1 * x1 / (2.0 * d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Interval1D;
    use crate::renewal::{steady_mean, Injection};

    fn params(x1: f64, k1: f64) -> PushPullParams {
        PushPullParams {
            interval: Interval1D::new(1.0, 1.0).unwrap(),
            sink: x1,
            injection: Injection::Uniform,
            gamma: 1.0,
            k1,
        }
    }

    #[test]
    fn value_at_sink() {
        let (l, d, g, k, x1) = (2.0, 0.5, 3.0, 1.5, 0.7);
        assert!((continuum_density(x1, l, d, g, k, x1) - g * l / k).abs() < 1e-13);
    }

    #[test]
    fn total_matches_discrete_at_wall_sink() {
        let prof = continuum_profile(&params(0.0, 1.0), 11).unwrap();
        assert!((prof.total - 4.0 / 3.0).abs() < 1e-14);
        let discrete = steady_mean(&params(0.0, 1.0)).unwrap().value;
        assert!((prof.total - discrete).abs() < 1e-12);
    }

    #[test]
    fn total_matches_quadrature() {
        let p = params(0.37, 2.0);
        let prof = continuum_profile(&p, 2).unwrap();
        let n = 200_000;
        let h = 1.0 / n as f64;
        let quad: f64 = (0..n)
            .map(|i| continuum_density((i as f64 + 0.5) * h, 1.0, 1.0, 1.0, 2.0, 0.37) * h)
            .sum();
        assert!((quad - prof.total).abs() < 1e-9);
    }

    #[test]
    fn perfect_sink_limit() {
        let prof = continuum_profile(&params(0.0, 1e14), 3).unwrap();
        assert!((prof.total - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reflecting_ends() {
        let (l, d, g, k, x1) = (1.0, 1.0, 1.0, 1.0, 0.4);
        let h = 1e-6;
        let left =
            (continuum_density(h, l, d, g, k, x1) - continuum_density(0.0, l, d, g, k, x1)) / h;
        let right =
            (continuum_density(l, l, d, g, k, x1) - continuum_density(l - h, l, d, g, k, x1)) / h;
        // one-sided differences carry an O(h) curvature term
        assert!(left.abs() < 1e-5 && right.abs() < 1e-5);
    }
}
