use serde::{Deserialize, Serialize};

use super::{Injection, PushPullParams};
use crate::error::{Error, Result};
use crate::numerics::Tridiagonal;
use crate::params::{Grid1D, Validate};

/// `S(t)` sampled at `t = i·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTable {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SurvivalTable {
    /// Linear interpolation, held constant past the last sample.
    pub fn at(&self, t: f64) -> f64 {
        let x = (t / self.dt).max(0.0);
        let i = x.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap_or(&1.0);
        }
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn t_end(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }
}

/// Time-domain survival from the backward equation `∂u/∂t = D∂²u − k₁δ(x − x₁)u`,
/// `u(·, 0) = 1`, reflecting ends, on `cells` cells with implicit Euler
/// steps. The delta is spread over the two nearest cells by a hat function,
/// mirrored at the walls. First order in `dt`, second order in space away
/// from the sink.
pub fn survival_curve(
    params: &PushPullParams,
    t_end: f64,
    dt: f64,
    cells: usize,
) -> Result<SurvivalTable> {
    params.validate()?;
    if !(dt > 0.0 && dt.is_finite() && t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Invalid(format!(
            "need dt > 0 and t_end >= 0, got {dt} and {t_end}"
        )));
    }
    let (l, d) = (params.interval.length, params.interval.diffusion);
    let grid = Grid1D::new(l, cells)?;
    let dx = grid.dx;
    let x1 = params.sink;
    let kill: Vec<f64> = grid
        .centers
        .iter()
        .map(|&c| {
            let w: f64 = [x1, -x1, 2.0 * l - x1]
                .iter()
                .map(|z| (1.0 - (z - c).abs() / dx).max(0.0))
                .sum();
            params.k1 * w / dx
        })
        .collect();
    let r = d * dt / (dx * dx);
    let lower: Vec<f64> = (0..cells).map(|i| if i > 0 { -r } else { 0.0 }).collect();
    let upper: Vec<f64> = (0..cells)
        .map(|i| if i + 1 < cells { -r } else { 0.0 })
        .collect();
    let diag: Vec<f64> = (0..cells)
        .map(|i| 1.0 + r * f64::from(u8::from(i > 0) + u8::from(i + 1 < cells)) + dt * kill[i])
        .collect();
    let solver = Tridiagonal::factor(&lower, &diag, &upper);
    let read = |u: &[f64]| match params.injection {
        Injection::Uniform => u.iter().sum::<f64>() / cells as f64,
        Injection::At(y) => {
            let s = (y / dx - 0.5).clamp(0.0, (cells - 1) as f64);
            let i = (s.floor() as usize).min(cells - 2);
            let w = s - i as f64;
            u[i] * (1.0 - w) + u[i + 1] * w
        }
    };
    let steps = (t_end / dt).round() as usize;
    let mut u = vec![1.0; cells];
    let mut values = Vec::with_capacity(steps + 1);
    values.push(1.0);
    for _ in 0..steps {
        solver.solve_in_place(&mut u);
        values.push(read(&u));
    }
    Ok(SurvivalTable { dt, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Interval1D;
    use crate::renewal::LaplaceSurvival;

    fn params(x1: f64, injection: Injection, k1: f64) -> PushPullParams {
        PushPullParams {
            interval: Interval1D::new(1.0, 1.0).unwrap(),
            sink: x1,
            injection,
            gamma: 1.0,
            k1,
        }
    }

    fn lifetime(table: &SurvivalTable) -> f64 {
        let v = &table.values;
        table.dt * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
    }

    #[test]
    fn no_killing_survives() {
        let t = survival_curve(&params(0.3, Injection::Uniform, 0.0), 1.0, 0.01, 50).unwrap();
        assert!(t.values.iter().all(|&s| (s - 1.0).abs() < 1e-12));
    }

    #[test]
    fn integral_matches_mean_lifetime() {
        for (x1, inj) in [
            (0.0, Injection::Uniform),
            (0.5, Injection::At(0.1)),
            (0.3, Injection::At(0.9)),
        ] {
            let p = params(x1, inj, 2.0);
            let t = survival_curve(&p, 30.0, 1e-3, 400).unwrap();
            let exact = LaplaceSurvival::new(p).unwrap().mean_lifetime().unwrap();
            assert!(
                (lifetime(&t) - exact).abs() < 2e-3 * exact,
                "{x1}: {} vs {exact}",
                lifetime(&t)
            );
            for w in t.values.windows(2) {
                assert!(w[1] <= w[0] + 1e-14);
            }
        }
    }

    #[test]
    fn interpolation() {
        let t = SurvivalTable {
            dt: 0.5,
            values: vec![1.0, 0.5, 0.25],
        };
        assert_eq!(t.at(0.25), 0.75);
        assert_eq!(t.at(5.0), 0.25);
        assert_eq!(t.t_end(), 1.0);
    }
}
