//! Channel gating with agonists produced and degraded as Poisson processes.
//!
//! The joint state is `(k, q)`: `k` free channels and `q` agonists in the
//! compartment. Under the default reading the `S − k` bound agonists are part
//! of `q`, so free agonists number `(q − S + k)⁺`, and degradation acts on
//! every agonist (a bound agonist removed frees its channel). With that
//! choice the `q`-marginal is exactly Poisson(`γ/K₋₁`) at stationarity,
//! which is what the slow push-pull mixture assumes.

use serde::{Deserialize, Serialize};

use super::chain::LabelledChain;
use super::{stationary_dist, BirthDeathSpec};
use crate::error::{Error, Result};
use crate::params::{check_positive, check_rate, Validate};

/// How the binding propensity `λ_{k,q}` counts available agonists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BindingReading {
    /// `k(q − S + k)⁺/τ₁`: agonists present minus those already bound.
    #[default]
    FreeAgonists,
    /// `k(M − q + k)⁺/τ₁` with a fixed parameter `M`, taking the symbols as
    /// printed.
    Literal { m: u32 },
}

/// Which agonists the degradation rate `K₋₁` acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Degradation {
    /// Every agonist, free or bound.
    #[default]
    AllAgonists,
    /// Only free agonists.
    FreeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushPullChainSpec {
    pub channels: u32,
    pub k_minus1: f64,
    pub tau1: f64,
    /// Injection rate `γ`.
    pub gamma: f64,
    /// Degradation rate `K₋₁`.
    pub degradation_rate: f64,
    /// Agonist cap; `None` uses [`poisson_cap`].
    #[serde(default)]
    pub q_max: Option<u32>,
    #[serde(default)]
    pub reading: BindingReading,
    #[serde(default)]
    pub degradation: Degradation,
}

impl Validate for PushPullChainSpec {
    fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::NonPositive {
                name: "channels",
                value: 0.0,
            });
        }
        check_rate("k_minus1", self.k_minus1)?;
        check_positive("tau1", self.tau1)?;
        check_rate("gamma", self.gamma)?;
        check_rate("degradation_rate", self.degradation_rate)?;
        if self.gamma > 0.0 && self.degradation_rate == 0.0 {
            return Err(Error::Invalid(
                "injection without degradation has no stationary agonist count".into(),
            ));
        }
        Ok(())
    }
}

/// `max(20, ⌈μ + 10√μ⌉)` for a Poisson mean `μ`.
pub fn poisson_cap(mean: f64) -> u32 {
    (mean + 10.0 * mean.sqrt()).ceil().max(20.0) as u32
}

/// `Pr{X > cap}` for `X ~ Poisson(mean)`.
fn poisson_tail(mean: f64, cap: u32) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    // sum the pmf above the cap until terms are negligible
    let mut log_p = -mean + f64::from(cap + 1) * mean.ln() - ln_factorial(cap + 1);
    let mut tail = 0.0;
    let mut j = cap + 1;
    loop {
        let p = log_p.exp();
        tail += p;
        if p < 1e-18 * tail.max(1e-300) || j > cap + 100_000 {
            break;
        }
        j += 1;
        log_p += mean.ln() - f64::from(j).ln();
    }
    tail
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|i| f64::from(i).ln()).sum()
}

impl PushPullChainSpec {
    pub fn cap(&self) -> u32 {
        self.q_max.unwrap_or_else(|| {
            if self.degradation_rate > 0.0 {
                poisson_cap(self.gamma / self.degradation_rate)
            } else {
                20
            }
        })
    }

    fn free_agonists(&self, k: u32, q: u32) -> u32 {
        match self.reading {
            BindingReading::FreeAgonists => (q + k).saturating_sub(self.channels),
            BindingReading::Literal { .. } => q,
        }
    }

    pub fn moves(&self, (k, q): (u32, u32), cap: u32) -> Vec<((u32, u32), f64)> {
        let s = self.channels;
        let mut out = Vec::with_capacity(5);
        let avail = match self.reading {
            BindingReading::FreeAgonists => (q + k).saturating_sub(s),
            BindingReading::Literal { m } => (m + k).saturating_sub(q),
        };
        if k > 0 {
            out.push(((k - 1, q), f64::from(k) * f64::from(avail) / self.tau1));
        }
        if k < s {
            out.push(((k + 1, q), self.k_minus1 * f64::from(s - k)));
        }
        if q < cap {
            out.push(((k, q + 1), self.gamma));
        }
        if q > 0 {
            let free = self.free_agonists(k, q);
            out.push(((k, q - 1), self.degradation_rate * f64::from(free)));
            if self.degradation == Degradation::AllAgonists
                && matches!(self.reading, BindingReading::FreeAgonists)
                && k < s
            {
                out.push(((k + 1, q - 1), self.degradation_rate * f64::from(s - k)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushPullChainRun {
    pub t: Vec<f64>,
    /// Mean open channels `⟨S − k⟩`.
    pub mean_open: Vec<f64>,
    /// Mean agonist count `⟨q⟩`.
    pub mean_agonists: Vec<f64>,
    pub states: Vec<(u32, u32)>,
    pub final_distribution: Vec<f64>,
    /// Largest probability seen at `q = q_max`.
    pub cap_mass: f64,
}

impl PushPullChainRun {
    /// Marginal of the open-channel count at the final time.
    pub fn open_marginal(&self, channels: u32) -> Vec<f64> {
        let mut out = vec![0.0; channels as usize + 1];
        for (&(k, _), &p) in self.states.iter().zip(&self.final_distribution) {
            out[(channels - k) as usize] += p;
        }
        out
    }

    /// Marginal of the agonist count at the final time.
    pub fn agonist_marginal(&self) -> Vec<f64> {
        let top = self.states.iter().map(|s| s.1).max().unwrap_or(0);
        let mut out = vec![0.0; top as usize + 1];
        for (&(_, q), &p) in self.states.iter().zip(&self.final_distribution) {
            out[q as usize] += p;
        }
        out
    }

    pub fn final_open_moments(&self, channels: u32) -> (f64, f64) {
        let m = self.open_marginal(channels);
        let mean: f64 = m.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let second: f64 = m.iter().enumerate().map(|(n, p)| (n * n) as f64 * p).sum();
        (mean, second - mean * mean)
    }
}

/// Integrates `P_{k,q}(t)` from `P_{S,0}(0) = 1`.
pub fn pushpull_chain(spec: &PushPullChainSpec, t_end: f64, dt: f64) -> Result<PushPullChainRun> {
    spec.validate()?;
    let cap = spec.cap();
    if spec.degradation_rate > 0.0 {
        let tail = poisson_tail(spec.gamma / spec.degradation_rate, cap);
        if tail > 1e-8 {
            return Err(Error::TruncationTail { tail });
        }
    }
    let chain = LabelledChain::explore((spec.channels, 0u32), |s| spec.moves(s, cap))?;
    let path = chain
        .generator
        .integrate(&chain.point_mass((spec.channels, 0)), t_end, dt)?;
    let s = f64::from(spec.channels);
    let mut run = PushPullChainRun {
        t: Vec::with_capacity(path.len()),
        mean_open: Vec::with_capacity(path.len()),
        mean_agonists: Vec::with_capacity(path.len()),
        states: chain.states.clone(),
        final_distribution: Vec::new(),
        cap_mass: 0.0,
    };
    for (t, p) in &path {
        run.t.push(*t);
        run.mean_open
            .push(chain.expect(p, |(k, _)| s - f64::from(k)));
        run.mean_agonists
            .push(chain.expect(p, |(_, q)| f64::from(q)));
        let at_cap = chain.expect(p, |(_, q)| if q == cap { 1.0 } else { 0.0 });
        run.cap_mass = run.cap_mass.max(at_cap);
    }
    run.final_distribution = path.last().map(|(_, p)| p.clone()).unwrap_or_default();
    Ok(run)
}

/// Open-channel moments mixed over an agonist-count law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedMoments {
    /// `Σ_M ⟨n⟩(M) Pr{M}`.
    pub mean: f64,
    /// `Σ_M ⟨n⟩(M)² Pr{M}`, the second moment as the mixing formula states it.
    pub second_moment_of_means: f64,
    /// `Σ_M ⟨n²⟩(M) Pr{M}`, the true second moment of the mixture.
    pub second_moment: f64,
    /// `second_moment − mean²`.
    pub variance: f64,
}

/// Mixes stationary open-channel moments over `(M, Pr{M})` pairs. The
/// weights are renormalized.
pub fn slow_pushpull_mixing(
    channels: u32,
    tau1: f64,
    k_minus1: f64,
    law: &[(u32, f64)],
) -> Result<MixedMoments> {
    let total: f64 = law.iter().map(|(_, p)| *p).sum();
    if !(total > 0.0) || law.iter().any(|(_, p)| *p < 0.0 || !p.is_finite()) {
        return Err(Error::Invalid(
            "mixing weights must be non-negative with positive sum".into(),
        ));
    }
    let mut out = MixedMoments {
        mean: 0.0,
        second_moment_of_means: 0.0,
        second_moment: 0.0,
        variance: 0.0,
    };
    for &(m, p) in law {
        if p == 0.0 {
            continue;
        }
        let w = p / total;
        let d = stationary_dist(&BirthDeathSpec {
            channels,
            agonists: m,
            tau1,
            k_minus1,
        })?;
        out.mean += w * d.mean_open;
        out.second_moment_of_means += w * d.mean_open * d.mean_open;
        out.second_moment += w * d.second_moment_open;
    }
    out.variance = (out.second_moment - out.mean * out.mean).max(0.0);
    Ok(out)
}

/// Poisson(`mean`) weights on `0..=cap`.
pub fn poisson_law(mean: f64, cap: u32) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(cap as usize + 1);
    let mut log_p = -mean;
    for m in 0..=cap {
        if m > 0 {
            log_p += mean.ln() - f64::from(m).ln();
        }
        out.push((
            m,
            if mean == 0.0 {
                f64::from(u8::from(m == 0))
            } else {
                log_p.exp()
            },
        ));
    }
    out
}
