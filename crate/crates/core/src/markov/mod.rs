//! Markov models of channel gating.
//!
//! `S` channels on the boundary of a compartment bind `M` agonists one at a
//! time. The state `k` counts FREE channels, so the number of open (bound)
//! channels is `S − k` and the number of free agonists is `(M − S + k)⁺`.
//! Binding happens at `λ_k = k(M − S + k)⁺/τ₁`, unbinding at `k₋₁` per bound
//! channel. All reported moments refer to open channels.

mod chain;
mod mm;
mod pushpull;

pub use chain::{Generator, LabelledChain, DENSE_LIMIT, EXPM_LIMIT, STATE_LIMIT};
pub use mm::{mm_master, MMSpec, MMTrajectory};
pub use pushpull::{
    poisson_cap, poisson_law, pushpull_chain, slow_pushpull_mixing, BindingReading, Degradation,
    MixedMoments, PushPullChainRun, PushPullChainSpec,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::log_sum_exp;
use crate::params::{check_positive, check_rate, Domain3DParams, Validate};

/// Channel-gating birth-death chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathSpec {
    /// Channel count `S`.
    pub channels: u32,
    /// Agonist count `M`.
    pub agonists: u32,
    /// Mean first passage time `τ₁` to a channel.
    pub tau1: f64,
    /// Unbinding rate `k₋₁`.
    pub k_minus1: f64,
}

impl Validate for BirthDeathSpec {
    fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::NonPositive {
                name: "channels",
                value: 0.0,
            });
        }
        check_positive("tau1", self.tau1)?;
        check_rate("k_minus1", self.k_minus1)
    }
}

impl BirthDeathSpec {
    /// Smallest reachable free-channel count `(S − M)⁺`.
    pub fn k_min(&self) -> u32 {
        self.channels.saturating_sub(self.agonists)
    }

    /// Generator over `k = k_min..=S`, state index `k − k_min`.
    pub fn generator(&self) -> Result<Generator> {
        self.validate()?;
        let lo = self.k_min();
        let s = self.channels;
        let mut g = Generator::new((s - lo + 1) as usize);
        for k in lo..=s {
            let i = (k - lo) as usize;
            if k > lo {
                g.add(i, i - 1, binding_rate(k, self)?);
            }
            if k < s {
                g.add(i, i + 1, self.k_minus1 * f64::from(s - k));
            }
        }
        Ok(g)
    }
}

/// `⟨τ₁⟩ = |Ω|/(πD) · ln(|∂Ω|/S_ch)`, the narrow-escape time to the channel
/// area; decreasing in `S_ch` and vanishing as `S_ch → |∂Ω|`.
pub fn mfpt_tau1(domain: &Domain3DParams, diffusion: f64) -> Result<f64> {
    domain.validate()?;
    check_positive("diffusion", diffusion)?;
    if domain.channel_area >= domain.boundary_area {
        return Err(Error::ChannelAreaExceedsBoundary {
            channel_area: domain.channel_area,
            boundary_area: domain.boundary_area,
        });
    }
    Ok(domain.volume / (std::f64::consts::PI * diffusion)
        * (domain.boundary_area / domain.channel_area).ln())
}

/// `λ_k = k(M − S + k)⁺/τ₁` for `k` free channels.
pub fn binding_rate(k: u32, spec: &BirthDeathSpec) -> Result<f64> {
    if k > spec.channels {
        return Err(Error::OutOfRange {
            what: "free channels",
            value: f64::from(k),
            lo: f64::from(spec.k_min()),
            hi: f64::from(spec.channels),
        });
    }
    let free_agonists = (i64::from(spec.agonists) - i64::from(spec.channels) + i64::from(k)).max(0);
    Ok(f64::from(k) * free_agonists as f64 / spec.tau1)
}

/// Stationary law of the free-channel count and open-channel moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDist {
    /// Smallest free-channel count represented in `probabilities`.
    pub k_min: u32,
    /// `P_k` for `k = k_min..=S`.
    pub probabilities: Vec<f64>,
    /// `⟨S − k⟩`.
    pub mean_open: f64,
    /// `⟨(S − k)²⟩`.
    pub second_moment_open: f64,
    /// `σ²_S(M)`.
    pub variance_open: f64,
}

impl StationaryDist {
    pub fn prob_free(&self, k: u32) -> f64 {
        if k < self.k_min {
            return 0.0;
        }
        self.probabilities
            .get((k - self.k_min) as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Mean number of FREE channels.
    pub fn mean_free(&self, channels: u32) -> f64 {
        f64::from(channels) - self.mean_open
    }
}

/// Stationary distribution from the birth-death product formula, built in
/// log space: `ln P_{k−1} = ln P_k + ln λ_k − ln(k₋₁(S − k + 1))`.
pub fn stationary_dist(spec: &BirthDeathSpec) -> Result<StationaryDist> {
    spec.validate()?;
    let s = spec.channels;
    let lo = spec.k_min();
    let n = (s - lo + 1) as usize;
    let mut probabilities = vec![0.0; n];
    if spec.k_minus1 == 0.0 {
        // nothing unbinds: every reachable channel ends up bound
        probabilities[0] = 1.0;
    } else {
        let mut logw = vec![0.0; n];
        for k in (lo + 1..=s).rev() {
            let i = (k - lo) as usize;
            logw[i - 1] =
                logw[i] + binding_rate(k, spec)?.ln() - (spec.k_minus1 * f64::from(s - k + 1)).ln();
        }
        let norm = log_sum_exp(&logw);
        for (p, w) in probabilities.iter_mut().zip(&logw) {
            *p = (w - norm).exp();
        }
    }
    Ok(with_moments(s, lo, probabilities))
}

fn with_moments(s: u32, lo: u32, probabilities: Vec<f64>) -> StationaryDist {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        let open = f64::from(s - (lo + i as u32));
        mean += open * p;
        second += open * open * p;
    }
    StationaryDist {
        k_min: lo,
        probabilities,
        mean_open: mean,
        second_moment_open: second,
        variance_open: (second - mean * mean).max(0.0),
    }
}

/// `P_k(t)` from `P_S(0) = 1`, recorded every `dt` up to `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientMaster {
    pub k_min: u32,
    pub t: Vec<f64>,
    pub probabilities: Vec<Vec<f64>>,
    pub mean_open: Vec<f64>,
}

pub fn transient_master(spec: &BirthDeathSpec, t_end: f64, dt: f64) -> Result<TransientMaster> {
    let g = spec.generator()?;
    let lo = spec.k_min();
    let mut p0 = vec![0.0; g.len()];
    p0[g.len() - 1] = 1.0;
    let path = g.integrate(&p0, t_end, dt)?;
    let mut t = Vec::with_capacity(path.len());
    let mut probabilities = Vec::with_capacity(path.len());
    let mut mean_open = Vec::with_capacity(path.len());
    for (time, p) in path {
        t.push(time);
        mean_open.push(with_moments(spec.channels, lo, p.clone()).mean_open);
        probabilities.push(p);
    }
    Ok(TransientMaster {
        k_min: lo,
        t,
        probabilities,
        mean_open,
    })
}

/// Root of the bound-channel self-consistency together with the small-root
/// approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfConsistentBound {
    /// Smallest `n` in `[0, min(M, S)]` with
    /// `n = M / (1 + (τ₁k₋₁/S_ch)(M − n)(S − n))`.
    pub root: f64,
    /// `M / (1 + τ₁k₋₁M/S¹_ch)` with `S¹_ch = S_ch/S`.
    pub small_root_approx: f64,
}

/// Solves the mean-field fixed point for the number of bound channels by a
/// sign scan followed by bisection. With `c = τ₁k₋₁/S_ch` the residual
/// factors as `(M − n)(c·n(S − n) − 1)`, so `n = M` is a root whenever
/// `M ≤ S`; the smallest root is returned.
pub fn mean_bound_selfconsistent(
    agonists: f64,
    channels: f64,
    k_minus1: f64,
    tau1: f64,
    channel_area: f64,
) -> Result<SelfConsistentBound> {
    check_rate("agonists", agonists)?;
    check_rate("channels", channels)?;
    check_rate("k_minus1", k_minus1)?;
    check_positive("tau1", tau1)?;
    check_positive("channel_area", channel_area)?;
    let m = agonists;
    let c = tau1 * k_minus1 / channel_area;
    let g = |n: f64| n - m / (1.0 + c * (m - n) * (channels - n));
    let hi = m.min(channels);
    let small_root_approx = if channels > 0.0 {
        m / (1.0 + tau1 * k_minus1 * m / (channel_area / channels))
    } else {
        0.0
    };
    if m == 0.0 {
        return Ok(SelfConsistentBound {
            root: 0.0,
            small_root_approx,
        });
    }

    let scan = 2000;
    let mut lo_n = 0.0;
    let mut g_lo = g(0.0);
    let mut bracket = None;
    for i in 1..=scan {
        let n = hi * i as f64 / scan as f64;
        let gn = g(n);
        if gn == 0.0 || gn.abs() <= 1e-13 * m {
            bracket = Some((n, n));
            break;
        }
        if gn.signum() != g_lo.signum() {
            bracket = Some((lo_n, n));
            break;
        }
        lo_n = n;
        g_lo = gn;
    }
    let Some((mut a, mut b)) = bracket else {
        return Err(Error::NoRootInBracket { lo: 0.0, hi });
    };
    let sign_a = g(a).signum();
    for _ in 0..200 {
        if b - a <= 1e-15 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (a + b);
        if g(mid).signum() == sign_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(SelfConsistentBound {
        root: 0.5 * (a + b),
        small_root_approx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(s: u32, m: u32, tau1: f64, km1: f64) -> BirthDeathSpec {
        BirthDeathSpec {
            channels: s,
            agonists: m,
            tau1,
            k_minus1: km1,
        }
    }

    #[test]
    fn mfpt_examples() {
        let d = Domain3DParams::from_channels(1.0, 6.0, 0.006, 10).unwrap();
        let t = mfpt_tau1(&d, 1.0).unwrap();
        assert!((t - 100f64.ln() / std::f64::consts::PI).abs() < 1e-12);
        let half = Domain3DParams::from_channels(1.0, 6.0, 0.003, 10).unwrap();
        let t2 = mfpt_tau1(&half, 1.0).unwrap();
        assert!((t2 - t - 2f64.ln() / std::f64::consts::PI).abs() < 1e-12);
        let near = Domain3DParams::from_channels(1.0, 6.0, 0.5999999, 10).unwrap();
        assert!(mfpt_tau1(&near, 1.0).unwrap() < 1e-6);
        let full = Domain3DParams::from_channels(1.0, 6.0, 0.6, 10).unwrap();
        assert!(mfpt_tau1(&full, 1.0).is_err());
    }

    #[test]
    fn binding_rate_examples() {
        let sp = spec(4, 7, 0.5, 1.0);
        assert_eq!(binding_rate(4, &sp).unwrap(), 4.0 * 7.0 / 0.5);
        let sp = spec(4, 2, 1.0, 1.0);
        assert_eq!(binding_rate(2, &sp).unwrap(), 0.0);
        assert_eq!(binding_rate(1, &spec(1, 1, 1.0, 1.0)).unwrap(), 1.0);
        assert!(binding_rate(5, &sp).is_err());
    }

    #[test]
    fn stationary_examples() {
        let d = stationary_dist(&spec(5, 0, 1.0, 1.0)).unwrap();
        assert_eq!(d.probabilities, vec![1.0]);
        assert_eq!(d.mean_open, 0.0);

        let d = stationary_dist(&spec(1, 1, 1.0, 1.0)).unwrap();
        assert!((d.prob_free(0) - 0.5).abs() < 1e-15);
        assert!((d.mean_open - 0.5).abs() < 1e-15);
        assert!((d.variance_open - 0.25).abs() < 1e-15);
    }

    #[test]
    fn no_unbinding_binds_everything() {
        let d = stationary_dist(&spec(4, 6, 1.0, 0.0)).unwrap();
        assert_eq!(d.mean_open, 4.0);
        let d = stationary_dist(&spec(4, 2, 1.0, 0.0)).unwrap();
        assert_eq!(d.mean_open, 2.0);
    }

    #[test]
    fn large_chain_does_not_overflow() {
        let d = stationary_dist(&spec(1000, 1500, 0.01, 1000.0)).unwrap();
        assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d.mean_open.is_finite() && d.variance_open >= 0.0);
    }

    #[test]
    fn stationary_is_null_vector() {
        let sp = spec(10, 14, 0.01, 500.0);
        let d = stationary_dist(&sp).unwrap();
        let g = sp.generator().unwrap();
        let scale = g.max_exit_rate();
        assert!(g.residual(&d.probabilities) < 1e-10 * scale);
        let dense = g.stationary_dense().unwrap();
        for (a, b) in dense.iter().zip(&d.probabilities) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transient_relaxes() {
        let sp = spec(4, 3, 0.5, 2.0);
        // slowest relaxation is set by unbinding, k₋₁ = 2
        let out = transient_master(&sp, 20.0, 1e-2).unwrap();
        assert_eq!(*out.probabilities[0].last().unwrap(), 1.0);
        for p in &out.probabilities {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
        let d = stationary_dist(&sp).unwrap();
        for (a, b) in out
            .probabilities
            .last()
            .unwrap()
            .iter()
            .zip(&d.probabilities)
        {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn selfconsistent_examples() {
        let r = mean_bound_selfconsistent(10.0, 10.0, 0.0, 1.0, 1.0).unwrap();
        assert!((r.root - 10.0).abs() < 1e-9);
        let r = mean_bound_selfconsistent(6.0, 10.0, 1e9, 1.0, 1.0).unwrap();
        assert!(r.root < 1e-6);
        // c = 1 (> 4/S²): quadratic root (S − sqrt(S² − 4/c))/2
        let r = mean_bound_selfconsistent(8.0, 10.0, 1.0, 1.0, 1.0).unwrap();
        let expected = (10.0 - (100.0f64 - 4.0).sqrt()) / 2.0;
        assert!((r.root - expected).abs() < 1e-9);
        assert!(matches!(
            mean_bound_selfconsistent(12.0, 10.0, 0.0, 1.0, 1.0),
            Err(Error::NoRootInBracket { .. })
        ));
    }

    proptest! {
        #[test]
        fn detailed_balance(s in 1u32..40, m in 0u32..60, tau1 in 0.001f64..2.0, km1 in 0.01f64..1e3) {
            let sp = spec(s, m, tau1, km1);
            let d = stationary_dist(&sp).unwrap();
            prop_assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for k in sp.k_min() + 1..=s {
                let lhs = binding_rate(k, &sp).unwrap() * d.prob_free(k);
                let rhs = km1 * f64::from(s - k + 1) * d.prob_free(k - 1);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-300));
            }
        }

        #[test]
        fn more_agonists_open_more(s in 1u32..20, m in 0u32..40, tau1 in 0.01f64..1.0, km1 in 0.1f64..100.0) {
            let a = stationary_dist(&spec(s, m, tau1, km1)).unwrap().mean_open;
            let b = stationary_dist(&spec(s, m + 1, tau1, km1)).unwrap().mean_open;
            prop_assert!(b >= a - 1e-12);
        }
    }
}
