use serde::{Deserialize, Serialize};

use super::chain::LabelledChain;
use crate::error::{Error, Result};
use crate::params::{check_positive, check_rate, Validate};

/// Michaelis-Menten scheme `M + E ⇌ ME → E + P` in a small compartment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MMSpec {
    /// Initial substrate count `M₀`.
    pub substrate: u32,
    /// Enzyme count `E₀`.
    pub enzymes: u32,
    pub k_minus1: f64,
    pub k2: f64,
    pub tau1: f64,
}

impl Validate for MMSpec {
    fn validate(&self) -> Result<()> {
        check_rate("k_minus1", self.k_minus1)?;
        check_rate("k2", self.k2)?;
        check_positive("tau1", self.tau1)
    }
}

impl MMSpec {
    /// Outgoing transitions from `(k products, q bound enzymes)`: binding at
    /// `(M₀ − k − q)⁺(E₀ − q)/τ₁`, unbinding at `k₋₁q`, catalysis at `k₂q`.
    pub fn moves(&self, (k, q): (u32, u32)) -> Vec<((u32, u32), f64)> {
        let free_substrate = f64::from(self.substrate.saturating_sub(k + q));
        let free_enzyme = f64::from(self.enzymes - q);
        let mut out = Vec::with_capacity(3);
        if q < self.enzymes {
            out.push(((k, q + 1), free_substrate * free_enzyme / self.tau1));
        }
        if q > 0 {
            out.push(((k, q - 1), self.k_minus1 * f64::from(q)));
            out.push(((k + 1, q - 1), self.k2 * f64::from(q)));
        }
        out
    }
}

/// Output of [`mm_master`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MMTrajectory {
    pub t: Vec<f64>,
    /// `⟨P(t)⟩`.
    pub mean_product: Vec<f64>,
    /// Mean bound enzyme `⟨q(t)⟩`.
    pub mean_bound: Vec<f64>,
    /// Mean free enzyme `⟨E₀ − q(t)⟩`.
    pub mean_free_enzyme: Vec<f64>,
    /// States `(k, q)` in the order of `final_distribution`.
    pub states: Vec<(u32, u32)>,
    pub final_distribution: Vec<f64>,
}

/// Integrates the master equation for `P_{k,q}(t)` from `P_{0,0}(0) = 1`.
pub fn mm_master(spec: &MMSpec, t_end: f64, dt: f64) -> Result<MMTrajectory> {
    spec.validate()?;
    let n_states = (u64::from(spec.substrate) + 1) * (u64::from(spec.enzymes) + 1);
    if n_states > super::STATE_LIMIT as u64 {
        return Err(Error::StateSpaceTooLarge(n_states as usize));
    }
    let chain = LabelledChain::explore((0u32, 0u32), |s| spec.moves(s))?;
    let path = chain
        .generator
        .integrate(&chain.point_mass((0, 0)), t_end, dt)?;
    let mut out = MMTrajectory {
        t: Vec::with_capacity(path.len()),
        mean_product: Vec::with_capacity(path.len()),
        mean_bound: Vec::with_capacity(path.len()),
        mean_free_enzyme: Vec::with_capacity(path.len()),
        states: chain.states.clone(),
        final_distribution: Vec::new(),
    };
    let e0 = f64::from(spec.enzymes);
    for (t, p) in &path {
        out.t.push(*t);
        out.mean_product
            .push(chain.expect(p, |(k, _)| f64::from(k)));
        out.mean_bound.push(chain.expect(p, |(_, q)| f64::from(q)));
        out.mean_free_enzyme
            .push(chain.expect(p, |(_, q)| e0 - f64::from(q)));
    }
    out.final_distribution = path.last().map(|(_, p)| p.clone()).unwrap_or_default();
    Ok(out)
}
