//! Stochastic binding and unbinding chemistry in small domains.
//!
//! Three model families share the parameter types in [`params`]:
//!
//! * [`pde_master`]: joint position / site-occupancy densities on a 1D grid.
//! * [`renewal`]: a push-pull source and sink on an interval, solved through
//!   Laplace transforms of the survival probability.
//! * [`markov`]: birth-death chains for channel gating, Michaelis-Menten
//!   catalysis and the push-pull mixture.
//!
//! [`oracle`] holds particle and event-driven Monte Carlo simulators used to
//! cross-check every analytic formula.

pub mod curves;
pub mod error;
pub mod markov;
pub mod numerics;
pub mod oracle;
pub mod params;
pub mod pde_master;
pub mod renewal;

pub use error::{Error, Result};
pub use params::{
    BoundaryCondition, Domain3DParams, Grid1D, InitialDistribution, Interval1D, ReactionRates,
    SiteDensity, Validate, Wall,
};
