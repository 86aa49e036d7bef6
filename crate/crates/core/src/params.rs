//! Shared domain types: intervals, grids, rate constants, site layouts and
//! boundary tags. Every bundle is checked through [`Validate`] before a
//! solver or simulator touches it; after that it is treated as immutable.
//!
//! Units are carried in the field docs only. Rates are per unit time unless
//! noted; lengths and diffusion coefficients share one length unit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter bundles that can check their own invariants.
pub trait Validate: Sized {
    fn validate(&self) -> Result<()>;

    /// Consumes the bundle and hands it back only if it is valid.
    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { name, value })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive { name, value })
    }
}

pub(crate) fn check_rate(name: &'static str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value < 0.0 {
        Err(Error::NegativeRate { name, value })
    } else {
        Ok(())
    }
}

/// The interval `[0, L]` with diffusion coefficient `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval1D {
    /// Length `L` (length).
    pub length: f64,
    /// Diffusion coefficient `D` (length²/time).
    pub diffusion: f64,
}

impl Interval1D {
    pub fn new(length: f64, diffusion: f64) -> Result<Self> {
        Self { length, diffusion }.validated()
    }

    /// The `L = π`, `D = 1` scale on which the decay-rate expansion is written.
    pub fn normalized() -> Self {
        Self {
            length: std::f64::consts::PI,
            diffusion: 1.0,
        }
    }
}

impl Validate for Interval1D {
    fn validate(&self) -> Result<()> {
        check_positive("length", self.length)?;
        check_positive("diffusion", self.diffusion)
    }
}

/// Geometry of a three-dimensional compartment with channels on its
/// boundary. Only enters through the mean first passage time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain3DParams {
    /// Volume `|Ω|` (length³).
    pub volume: f64,
    /// Boundary area `|∂Ω|` (length²).
    pub boundary_area: f64,
    /// Total channel area `S_ch` (length²).
    pub channel_area: f64,
    /// Effective area of one channel `S¹_ch` (length²).
    pub per_channel_area: f64,
    /// Number of channels `S`.
    pub channel_count: u32,
}

impl Domain3DParams {
    /// Builds the bundle from a per-channel area, deriving `S_ch = S·S¹_ch`.
    pub fn from_channels(
        volume: f64,
        boundary_area: f64,
        per_channel_area: f64,
        channel_count: u32,
    ) -> Result<Self> {
        Self {
            volume,
            boundary_area,
            channel_area: per_channel_area * f64::from(channel_count),
            per_channel_area,
            channel_count,
        }
        .validated()
    }
}

impl Validate for Domain3DParams {
    fn validate(&self) -> Result<()> {
        check_positive("volume", self.volume)?;
        check_positive("boundary_area", self.boundary_area)?;
        check_positive("channel_area", self.channel_area)?;
        check_positive("per_channel_area", self.per_channel_area)?;
        if self.channel_count == 0 {
            return Err(Error::NonPositive {
                name: "channel_count",
                value: 0.0,
            });
        }
        if self.channel_area > self.boundary_area {
            return Err(Error::ChannelAreaExceedsBoundary {
                channel_area: self.channel_area,
                boundary_area: self.boundary_area,
            });
        }
        let expected = f64::from(self.channel_count) * self.per_channel_area;
        if (expected - self.channel_area).abs() > 1e-9 * self.channel_area.max(expected) {
            return Err(Error::ChannelAreaMismatch {
                channel_area: self.channel_area,
                count: self.channel_count,
                per_channel: self.per_channel_area,
            });
        }
        Ok(())
    }
}

/// Rate constants shared by the models. Unused rates stay at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReactionRates {
    /// Forward binding rate `k₁`. On a grid the master-diffusion solvers use
    /// `K₁ = M₀·k₁·Δx`; for boundary binding and point sinks it is a
    /// length/time constant.
    pub k1: f64,
    /// Unbinding rate `k₋₁` (1/time).
    pub k_minus1: f64,
    /// Catalytic rate `k₂` (1/time).
    #[serde(default)]
    pub k2: f64,
    /// Injection rate `γ` (1/time, or 1/(time·length) in the continuum).
    #[serde(default)]
    pub gamma: f64,
    /// Uniform degradation rate `K₋₁` (1/time).
    #[serde(default)]
    pub degradation: f64,
}

impl Validate for ReactionRates {
    fn validate(&self) -> Result<()> {
        check_rate("k1", self.k1)?;
        check_rate("k_minus1", self.k_minus1)?;
        check_rate("k2", self.k2)?;
        check_rate("gamma", self.gamma)?;
        check_rate("degradation", self.degradation)
    }
}

/// Uniform cell-centred grid on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub length: f64,
    pub cells: usize,
    pub dx: f64,
    pub centers: Vec<f64>,
}

impl Grid1D {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        check_positive("length", length)?;
        if cells < 2 {
            return Err(Error::TooFewCells(cells));
        }
        let dx = length / cells as f64;
        let centers = (0..cells).map(|i| (i as f64 + 0.5) * dx).collect();
        Ok(Self {
            length,
            cells,
            dx,
            centers,
        })
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        ((x / self.dx).floor().max(0.0) as usize).min(self.cells - 1)
    }

    /// `Σ f_i Δx` over the cells.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.dx
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.cells == other.cells && (self.length - other.length).abs() <= 1e-12 * self.length
    }
}

impl Validate for Grid1D {
    fn validate(&self) -> Result<()> {
        check_positive("length", self.length)?;
        if self.cells < 2 {
            return Err(Error::TooFewCells(self.cells));
        }
        if self.centers.len() != self.cells {
            return Err(Error::LengthMismatch {
                what: "cell centers",
                got: self.centers.len(),
                expected: self.cells,
            });
        }
        if (self.dx * self.cells as f64 - self.length).abs() > 1e-12 * self.length {
            return Err(Error::Invalid(format!(
                "cell widths sum to {} instead of {}",
                self.dx * self.cells as f64,
                self.length
            )));
        }
        Ok(())
    }
}

/// Integer number of binding sites `S₀` in each grid cell. The density form
/// is `S₀/Δx`; the support `Ω′` is the set of cells with at least one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDensity {
    pub counts: Vec<u32>,
}

impl SiteDensity {
    pub fn uniform(grid: &Grid1D, per_cell: u32) -> Self {
        Self {
            counts: vec![per_cell; grid.cells],
        }
    }

    /// `per_cell` sites in cells `range`, none elsewhere.
    pub fn on_cells(grid: &Grid1D, per_cell: u32, range: std::ops::Range<usize>) -> Self {
        let counts = (0..grid.cells)
            .map(|i| if range.contains(&i) { per_cell } else { 0 })
            .collect();
        Self { counts }
    }

    /// Converts real-valued counts, rejecting anything that is not a
    /// non-negative integer.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        let counts = values
            .iter()
            .map(|&v| {
                check_finite("site count", v)?;
                if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
                    Err(Error::Invalid(format!(
                        "site counts must be non-negative integers, got {v}"
                    )))
                } else {
                    Ok(v as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn max(&self) -> u32 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn in_support(&self, cell: usize) -> bool {
        self.counts.get(cell).is_some_and(|&c| c > 0)
    }

    /// Measure `|Ω′|` of the support.
    pub fn support_measure(&self, grid: &Grid1D) -> f64 {
        self.counts.iter().filter(|&&c| c > 0).count() as f64 * grid.dx
    }

    /// Sites per unit length in `cell`.
    pub fn density(&self, grid: &Grid1D, cell: usize) -> f64 {
        f64::from(self.counts[cell]) / grid.dx
    }

    pub fn check_grid(&self, grid: &Grid1D) -> Result<()> {
        if self.counts.len() != grid.cells {
            return Err(Error::LengthMismatch {
                what: "site density",
                got: self.counts.len(),
                expected: grid.cells,
            });
        }
        Ok(())
    }
}

impl Validate for SiteDensity {
    fn validate(&self) -> Result<()> {
        if self.counts.is_empty() {
            return Err(Error::Invalid("site density has no cells".into()));
        }
        Ok(())
    }
}

/// Initial reactant pdf `m₀` per cell (integrating to one) and the particle
/// count `M₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDistribution {
    pub density: Vec<f64>,
    pub particles: u32,
}

impl InitialDistribution {
    pub fn uniform(grid: &Grid1D, particles: u32) -> Self {
        Self {
            density: vec![1.0 / grid.length; grid.cells],
            particles,
        }
    }

    /// Normalizes arbitrary non-negative cell weights into a pdf.
    pub fn from_weights(grid: &Grid1D, weights: &[f64], particles: u32) -> Result<Self> {
        if weights.len() != grid.cells {
            return Err(Error::LengthMismatch {
                what: "initial weights",
                got: weights.len(),
                expected: grid.cells,
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Invalid(
                "initial weights must be finite and >= 0".into(),
            ));
        }
        let mass = grid.integrate(weights);
        check_positive("initial mass", mass)?;
        Self {
            density: weights.iter().map(|w| w / mass).collect(),
            particles,
        }
        .validated()
    }

    /// Uniform over the cells in `range`.
    pub fn on_cells(grid: &Grid1D, range: std::ops::Range<usize>, particles: u32) -> Result<Self> {
        let weights: Vec<f64> = (0..grid.cells)
            .map(|i| if range.contains(&i) { 1.0 } else { 0.0 })
            .collect();
        Self::from_weights(grid, &weights, particles)
    }

    pub fn check_grid(&self, grid: &Grid1D) -> Result<()> {
        if self.density.len() != grid.cells {
            return Err(Error::LengthMismatch {
                what: "initial distribution",
                got: self.density.len(),
                expected: grid.cells,
            });
        }
        let mass = grid.integrate(&self.density);
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "initial distribution integrates to {mass}, expected 1"
            )));
        }
        Ok(())
    }
}

impl Validate for InitialDistribution {
    fn validate(&self) -> Result<()> {
        if self.density.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid(
                "initial density must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Behaviour of one endpoint of the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wall {
    /// Zero normal flux.
    #[default]
    Reflecting,
    /// Zero density (particles leave the domain).
    Absorbing,
}

/// One tag per endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub left: Wall,
    pub right: Wall,
}

impl BoundaryCondition {
    pub const REFLECTING: Self = Self {
        left: Wall::Reflecting,
        right: Wall::Reflecting,
    };

    pub fn is_reflecting(&self) -> bool {
        self.left == Wall::Reflecting && self.right == Wall::Reflecting
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_interval_accepted() {
        assert!(Interval1D::new(1.0, 1.0).is_ok());
        assert!(Interval1D::new(0.0, 1.0).is_err());
        assert!(Interval1D::new(1.0, -2.0).is_err());
    }

    #[test]
    fn negative_rate_rejected() {
        let rates = ReactionRates {
            k1: 1.0,
            k_minus1: -1.0,
            ..Default::default()
        };
        let err = rates.validate().unwrap_err();
        assert!(matches!(
            err,
            Error::NegativeRate {
                name: "k_minus1",
                ..
            }
        ));
        assert!(err.to_string().contains("negative rate"));
    }

    #[test]
    fn channel_area_larger_than_boundary_rejected() {
        let err = Domain3DParams::from_channels(1.0, 6.0, 1.2, 10).unwrap_err();
        assert!(matches!(err, Error::ChannelAreaExceedsBoundary { .. }));
        assert!(err
            .to_string()
            .contains("channel area exceeds boundary area"));

        let mismatched = Domain3DParams {
            volume: 1.0,
            boundary_area: 6.0,
            channel_area: 0.5,
            per_channel_area: 0.01,
            channel_count: 10,
        };
        assert!(matches!(
            mismatched.validate(),
            Err(Error::ChannelAreaMismatch { .. })
        ));
    }

    #[test]
    fn non_integer_sites_rejected() {
        assert!(SiteDensity::from_f64(&[1.0, 2.0, 0.0]).is_ok());
        assert!(SiteDensity::from_f64(&[1.0, 2.5]).is_err());
        assert!(SiteDensity::from_f64(&[-1.0]).is_err());
    }

    #[test]
    fn grid_rejects_degenerate() {
        assert!(matches!(Grid1D::new(1.0, 1), Err(Error::TooFewCells(1))));
        assert!(Grid1D::new(-1.0, 8).is_err());
    }

    #[test]
    fn cell_lookup_clamps() {
        let g = Grid1D::new(1.0, 4).unwrap();
        assert_eq!(g.cell_of(0.0), 0);
        assert_eq!(g.cell_of(0.3), 1);
        assert_eq!(g.cell_of(1.0), 3);
        assert_eq!(g.cell_of(-0.1), 0);
    }

    proptest! {
        #[test]
        fn grid_widths_sum_to_length(length in 1e-3f64..1e3, cells in 2usize..5000) {
            let g = Grid1D::new(length, cells).unwrap();
            let total: f64 = (0..cells).map(|_| g.dx).sum();
            prop_assert!((total - length).abs() <= 1e-12 * length * (cells as f64).sqrt().max(1.0));
            prop_assert!(g.validate().is_ok());
        }

        #[test]
        fn validated_bundles_round_trip(
            k1 in 0.0f64..1e3, km1 in 0.0f64..1e3, k2 in 0.0f64..10.0,
            gamma in 0.0f64..10.0, deg in 0.0f64..10.0,
            length in 1e-3f64..10.0, diffusion in 1e-3f64..10.0,
        ) {
            let rates = ReactionRates { k1, k_minus1: km1, k2, gamma, degradation: deg }.validated().unwrap();
            let text = serde_json::to_string(&rates).unwrap();
            let back: ReactionRates = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, rates);

            let interval = Interval1D::new(length, diffusion).unwrap();
            let text = serde_json::to_string(&interval).unwrap();
            let back: Interval1D = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, interval);
        }
    }
}
