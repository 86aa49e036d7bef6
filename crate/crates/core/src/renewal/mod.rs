//! Push-pull source and sink on `[0, L]`: particles are injected as a Poisson
//! stream, diffuse with reflecting walls and are killed at a point sink of
//! strength `k₁` (length/time). The count of surviving particles is handled
//! through renewal equations driven by the single-particle survival
//! probability `S(t)`.
//!
//! The Neumann Green's function is mass-normalized: its spatially constant
//! mode is `1/L` (so `∫Ḡ dx = 1/τ`).

mod continuum;
mod survival;
mod transient;

pub use continuum::{continuum_profile, ContinuumProfile};
pub use survival::{survival_curve, SurvivalTable};
pub use transient::{
    mean_transient, second_moment_transient, CountStats, RenewalSolver, DEFAULT_RENEWAL_TOLERANCE,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{check_finite, check_rate, Interval1D, Validate};

/// Where particles are injected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    At(f64),
    /// Uniformly over `[0, L]`.
    Uniform,
}

/// Parameters of the driftless push-pull model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushPullParams {
    pub interval: Interval1D,
    /// Sink position `x₁`.
    pub sink: f64,
    pub injection: Injection,
    /// Injection rate `γ`.
    pub gamma: f64,
    /// Killing strength `k₁` (length/time).
    pub k1: f64,
}

impl Validate for PushPullParams {
    fn validate(&self) -> Result<()> {
        self.interval.validate()?;
        let l = self.interval.length;
        in_interval("sink position", self.sink, l)?;
        if let Injection::At(y) = self.injection {
            in_interval("injection position", y, l)?;
        }
        check_rate("gamma", self.gamma)?;
        check_rate("k1", self.k1)
    }
}

fn in_interval(what: &'static str, x: f64, length: f64) -> Result<()> {
    check_finite(what, x)?;
    if !(0.0..=length).contains(&x) {
        return Err(Error::OutOfRange {
            what,
            value: x,
            lo: 0.0,
            hi: length,
        });
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive {
            name: "tau",
            value: tau,
        })
    }
}

/// `Σ_{n≥1} cos(nθ)/n² = π²/6 − πθ/2 + θ²/4` for `θ ∈ [0, 2π]`.
fn cos_over_n2(theta: f64) -> f64 {
    PI * PI / 6.0 - PI * theta / 2.0 + theta * theta / 4.0
}

const SERIES_TAIL_TOL: f64 = 1e-10;

/// Number of correction terms used by [`green_laplace`] for a given `τ`:
/// starts from `10·max(1, L/√(Dτ))` and grows until the tail bound is met.
pub fn series_terms(interval: &Interval1D, tau: f64) -> usize {
    let (l, d) = (interval.length, interval.diffusion);
    let c = d * (PI / l).powi(2);
    let mut n = (10.0 * (l / (d * tau).sqrt()).max(1.0)).ceil() as usize;
    // tail of (2/L)(τ/c) Σ_{m>N} 1/(m²(m²c+τ)) ≤ (2/L)·min(τ/(3c²N³), 1/(cN))
    let bound = |n: usize| {
        let nf = n as f64;
        2.0 / l * (tau / (3.0 * c * c * nf.powi(3))).min(1.0 / (c * nf))
    };
    while bound(n) > SERIES_TAIL_TOL && n < 50_000_000 {
        n *= 2;
    }
    n
}

/// Series part of `Ḡ(x, τ | y)` with the `1/(Lτ)` constant mode removed:
/// `(2/L) Σ cos(nπx/L)cos(nπy/L)/(D(nπ/L)² + τ)`. Accelerated by
/// subtracting the `1/n²` part, which is summed in closed form. `τ = 0` is
/// allowed here.
fn green_series(x: f64, y: f64, tau: f64, interval: &Interval1D, terms: usize) -> f64 {
    let (l, d) = (interval.length, interval.diffusion);
    let c = d * (PI / l).powi(2);
    let a = PI * x / l;
    let b = PI * y / l;
    let (t1, t2) = ((a - b).abs(), a + b);
    // cos(na)cos(nb) = (cos(n t1) + cos(n t2))/2
    let head = 0.5 * (cos_over_n2(t1) + cos_over_n2(t2)) / c;
    if tau == 0.0 {
        return 2.0 / l * head;
    }
    let mut correction = 0.0;
    for n in (1..=terms).rev() {
        let nf = n as f64;
        let lam = nf * nf * c;
        let cc = 0.5 * ((nf * t1).cos() + (nf * t2).cos());
        correction += cc / (nf * nf * (lam + tau));
    }
    2.0 / l * (head - tau / c * correction)
}

/// Laplace transform of the mass-normalized Neumann heat kernel,
/// `Ḡ(x, τ | y) = 1/(Lτ) + (2/L) Σ_{n≥1} cos(nπx/L)cos(nπy/L)/(D(nπ/L)² + τ)`.
/// `terms = None` picks the count from [`series_terms`].
pub fn green_laplace(
    x: f64,
    y: f64,
    tau: f64,
    interval: &Interval1D,
    terms: Option<usize>,
) -> Result<f64> {
    interval.validate()?;
    check_tau(tau)?;
    in_interval("x", x, interval.length)?;
    in_interval("y", y, interval.length)?;
    let n = terms.unwrap_or_else(|| series_terms(interval, tau));
    Ok(1.0 / (interval.length * tau) + green_series(x, y, tau, interval, n))
}

/// Closed form of the same resolvent,
/// `cosh(k(L − x_>))·cosh(k·x_<) / (D k sinh(kL))` with `k = √(τ/D)`,
/// evaluated with exponential scaling so large `kL` does not overflow.
pub fn green_laplace_closed(x: f64, y: f64, tau: f64, interval: &Interval1D) -> Result<f64> {
    interval.validate()?;
    check_tau(tau)?;
    let (l, d) = (interval.length, interval.diffusion);
    let k = (tau / d).sqrt();
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    let a = k * (l - hi);
    let b = k * lo;
    let c = k * l;
    // cosh a cosh b / sinh c = e^{a+b-c}(1+e^{-2a})(1+e^{-2b}) / (2(1-e^{-2c}))
    let num = (a + b - c).exp() * (1.0 + (-2.0 * a).exp()) * (1.0 + (-2.0 * b).exp());
    let den = -2.0 * (-2.0 * c).exp_m1();
    Ok(num / den / (d * k))
}

/// Convention for the two free positions of the decay-rate expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaConvention {
    /// `x` is the sink and `y` the injection point.
    #[default]
    SinkFirst,
    /// `x` is the injection point and `y` the sink.
    InjectionFirst,
}

/// Result of the steady-mean formula together with its validity flag and
/// the exact value from the Laplace route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyMean {
    /// Closed-form value.
    pub value: f64,
    /// False when the formula is used outside the region where its Green's
    /// function is valid (sink to the right of the injection point, or a
    /// sink away from the left wall with uniform injection).
    pub in_domain: bool,
    /// `γ·S̄(0)` from the exact mean lifetime.
    pub exact: f64,
}

/// Evaluators for `Ḡ`, `p̄(x₁, τ | y)`, `S̄(τ)` and `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceSurvival {
    pub params: PushPullParams,
    /// Fixed number of series terms, or `None` for automatic selection.
    pub terms: Option<usize>,
}

impl LaplaceSurvival {
    pub fn new(params: PushPullParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            terms: None,
        })
    }

    pub fn with_terms(mut self, terms: usize) -> Self {
        self.terms = Some(terms);
        self
    }

    fn n_terms(&self, tau: f64) -> usize {
        self.terms
            .unwrap_or_else(|| series_terms(&self.params.interval, tau))
    }

    pub fn green(&self, x: f64, y: f64, tau: f64) -> Result<f64> {
        green_laplace(x, y, tau, &self.params.interval, Some(self.n_terms(tau)))
    }

    /// Series part of `Ḡ(x₁ | x₁) − Ḡ(x₁ | y)`, averaged over `y` for
    /// uniform injection; the `1/(Lτ)` parts cancel exactly.
    fn green_gap(&self, tau: f64, n: usize) -> (f64, f64) {
        let p = &self.params;
        let g11 = green_series(p.sink, p.sink, tau, &p.interval, n);
        let g1y = match p.injection {
            Injection::At(y) => green_series(p.sink, y, tau, &p.interval, n),
            Injection::Uniform => 0.0,
        };
        (g11, g11 - g1y)
    }

    /// `p̄(x₁, τ | y) = Ḡ(x₁|y) / (1 + k₁Ḡ(x₁|x₁))`.
    pub fn p_bar(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let p = &self.params;
        let n = self.n_terms(tau);
        let l = p.interval.length;
        let g11 = 1.0 / (l * tau) + green_series(p.sink, p.sink, tau, &p.interval, n);
        let g1y = match p.injection {
            Injection::At(y) => 1.0 / (l * tau) + green_series(p.sink, y, tau, &p.interval, n),
            Injection::Uniform => 1.0 / (l * tau),
        };
        Ok(g1y / (1.0 + p.k1 * g11))
    }

    /// `S̄(τ) = (1 − k₁p̄)/τ`, rearranged as
    /// `(1 + k₁(g₁₁ − g₁ᵧ)) / (τ + k₁(1/L + τg₁₁))` to avoid cancellation at
    /// small `τ`.
    pub fn survival(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let p = &self.params;
        let (g11, gap) = self.green_gap(tau, self.n_terms(tau));
        Ok((1.0 + p.k1 * gap) / (tau + p.k1 * (1.0 / p.interval.length + tau * g11)))
    }

    /// `S̄(0)`, the mean lifetime of one particle:
    /// `L/k₁ + L·(g(x₁,x₁) − g(x₁,y))` with the static Neumann kernel `g`.
    pub fn mean_lifetime(&self) -> Result<f64> {
        let p = &self.params;
        if p.k1 <= 0.0 {
            return Err(Error::NonPositive {
                name: "k1",
                value: p.k1,
            });
        }
        let (_, gap) = self.green_gap(0.0, 0);
        Ok(p.interval.length / p.k1 + p.interval.length * gap)
    }

    /// Decay rate from the small-`τ` expansion (see [`decay_rate_alpha`]).
    pub fn alpha(&self, convention: AlphaConvention) -> Result<f64> {
        decay_rate_alpha(&self.params, convention)
    }
}

/// `S̄(τ)` for the given parameters with `terms` series terms (automatic
/// when `None`).
pub fn survival_laplace(tau: f64, params: &PushPullParams, terms: Option<usize>) -> Result<f64> {
    let mut ev = LaplaceSurvival::new(*params)?;
    ev.terms = terms;
    ev.survival(tau)
}

/// Decay-rate expansion on the normalized interval (`L = π`, `D = 1`):
/// `α⁻¹ = (−(x² − y²)/(2π) + 1/k) / (1 + (2/π)(π²/6 − πx/2 + x²/2))`.
/// `y_sq` is `y²` (or its mean for a random injection point).
pub fn alpha_normalized(x: f64, y_sq: f64, k: f64) -> Result<f64> {
    if k < 0.0 || !k.is_finite() {
        return Err(Error::NegativeRate {
            name: "k1",
            value: k,
        });
    }
    if k == 0.0 {
        return Ok(0.0);
    }
    let num = -(x * x - y_sq) / (2.0 * PI) + 1.0 / k;
    let den = 1.0 + 2.0 / PI * (PI * PI / 6.0 - PI * x / 2.0 + x * x / 2.0);
    let inv = num / den;
    if !(inv > 0.0) {
        return Err(Error::Invalid(format!(
            "decay-rate expansion gives a non-positive time constant ({inv}) for x = {x}, y² = {y_sq}, k = {k}"
        )));
    }
    Ok(1.0 / inv)
}

/// Long-time decay rate of `S(t)` from the small-`τ` expansion, mapped to the
/// physical interval by similarity: lengths scale by `L/π`, time by
/// `(L/π)²/D`, and the sink strength by `(L/π)/D`.
pub fn decay_rate_alpha(params: &PushPullParams, convention: AlphaConvention) -> Result<f64> {
    params.interval.validate()?;
    let (l, d) = (params.interval.length, params.interval.diffusion);
    if params.k1 < 0.0 {
        return Err(Error::NegativeRate {
            name: "k1",
            value: params.k1,
        });
    }
    let scale = PI / l;
    let sink = params.sink * scale;
    let k = params.k1 / (scale * d);
    let alpha = match (convention, params.injection) {
        (AlphaConvention::SinkFirst, Injection::At(y)) => {
            alpha_normalized(sink, (y * scale).powi(2), k)?
        }
        (AlphaConvention::SinkFirst, Injection::Uniform) => {
            alpha_normalized(sink, PI * PI / 3.0, k)?
        }
        (AlphaConvention::InjectionFirst, Injection::At(y)) => {
            alpha_normalized(y * scale, sink * sink, k)?
        }
        (AlphaConvention::InjectionFirst, Injection::Uniform) => {
            return Err(Error::Invalid(
                "the injection-first convention needs a fixed injection point".into(),
            ))
        }
    };
    Ok(d * scale * scale * alpha)
}

/// Slowest decay rate of the killed diffusion: `λ = Dω²` with `ω` the
/// smallest positive root of `Dω sin(ωL) = k₁ cos(ωx₁) cos(ω(L − x₁))`.
/// This is the true long-time rate of `S(t)`, independent of the injection
/// point.
pub fn slowest_decay_rate(params: &PushPullParams) -> Result<f64> {
    params.validate()?;
    let (l, d, k1, x1) = (
        params.interval.length,
        params.interval.diffusion,
        params.k1,
        params.sink,
    );
    if k1 == 0.0 {
        return Ok(0.0);
    }
    let f = |w: f64| d * w * (w * l).sin() - k1 * (w * x1).cos() * (w * (l - x1)).cos();
    let upper = PI / (2.0 * x1.max(l - x1));
    let samples = 4096;
    let mut lo = 0.0;
    let mut hi = upper;
    for i in 1..=samples {
        let w = upper * i as f64 / samples as f64;
        if f(w) >= 0.0 {
            hi = w;
            break;
        }
        lo = w;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let w = 0.5 * (lo + hi);
    Ok(d * w * w)
}

/// Closed-form steady mean number of surviving particles,
/// `γ(−(L−y)²/(2D) + (L−x₁)²/(2D) + L/k₁)` for a fixed injection point and
/// `γ(−L²/(6D) + (L−x₁)²/(2D) + L/k₁)` for uniform injection.
pub fn steady_mean(params: &PushPullParams) -> Result<SteadyMean> {
    params.validate()?;
    let p = params;
    if p.k1 <= 0.0 {
        return Err(Error::NonPositive {
            name: "k1",
            value: p.k1,
        });
    }
    let (l, d) = (p.interval.length, p.interval.diffusion);
    let common = (l - p.sink).powi(2) / (2.0 * d) + l / p.k1;
    let (lifetime, in_domain) = match p.injection {
        Injection::At(y) => (common - (l - y).powi(2) / (2.0 * d), p.sink <= y),
        Injection::Uniform => (common - l * l / (6.0 * d), p.sink == 0.0),
    };
    let exact = p.gamma * LaplaceSurvival::new(*p)?.mean_lifetime()?;
    Ok(SteadyMean {
        value: p.gamma * lifetime,
        in_domain,
        exact,
    })
}

/// `σ² = γS̄(0) − γ²S̄(0)² + 2γ²S̄(α)/α`, the steady variance under the
/// single-exponential approximation `S(t) ≈ e^{−αt}` inside the
/// second-moment convolution. `survival` is the Laplace transform `S̄`.
pub fn steady_variance_with(
    gamma: f64,
    mean_lifetime: f64,
    alpha: f64,
    survival: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    check_rate("gamma", gamma)?;
    if !(alpha > 0.0) {
        return Err(Error::NonPositive {
            name: "alpha",
            value: alpha,
        });
    }
    let s_alpha = survival(alpha)?;
    Ok(
        gamma * mean_lifetime - gamma * gamma * mean_lifetime * mean_lifetime
            + 2.0 * gamma * gamma * s_alpha / alpha,
    )
}

/// Steady variance of the surviving count with `α` from
/// [`decay_rate_alpha`] and `S̄(0)` from the exact mean lifetime.
pub fn steady_variance(params: &PushPullParams, convention: AlphaConvention) -> Result<f64> {
    let ev = LaplaceSurvival::new(*params)?;
    let alpha = ev.alpha(convention)?;
    let lifetime = ev.mean_lifetime()?;
    steady_variance_with(params.gamma, lifetime, alpha, |tau| ev.survival(tau))
}
