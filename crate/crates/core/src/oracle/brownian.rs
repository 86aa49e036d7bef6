//! Brownian particles on `[0, L]` with binding, unbinding and killing.
//!
//! Increments are exact Gaussians of variance `2D·dt`. Reflection folds the
//! endpoint back into the interval, which is exact for the position law.

use rand::distributions::WeightedIndex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{run_replicas, EnsembleStats, McConfig, TimeSeriesStats};
use crate::error::{Error, Result};
use crate::params::{check_positive, Interval1D, ReactionRates, Validate, Wall};
use crate::pde_master::MasterProblem;
use crate::renewal::{Injection, PushPullParams};

/// Survivors required at a grid time for it to enter the decay-rate fit.
pub const MIN_FIT_SURVIVORS: usize = 20;

/// Largest `2D·dt/Δx²` accepted by the grid-based simulators.
const MAX_CELL_COURANT: f64 = 0.5;
/// Largest per-step reaction probability scale `rate·dt`.
const MAX_RATE_DT: f64 = 0.5;

/// Mirror `x` into `[0, L]`.
fn fold(x: f64, length: f64) -> f64 {
    let y = x.rem_euclid(2.0 * length);
    if y > length {
        2.0 * length - y
    } else {
        y
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

/// Uniform in `(0, 1]`, safe for `ln`.
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.gen::<f64>()
}

fn check_steps(name: &str, value: f64, limit: f64) -> Result<()> {
    if value > limit {
        return Err(Error::Stability(format!(
            "{name} = {value:.3e} exceeds {limit}; reduce dt"
        )));
    }
    Ok(())
}

/// Pooled results of [`simulate_model1`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model1Mc {
    /// Bound-particle count against time.
    pub bound: TimeSeriesStats,
    /// Free particles still inside the domain against time.
    pub free: TimeSeriesStats,
    /// Per-replica time average of the bound count over `t ≥ t_end/2`.
    pub time_averaged_bound: EnsembleStats,
}

#[derive(Clone, Copy)]
enum Particle {
    Free(f64),
    Bound(usize),
    Gone,
}

/// Particles diffusing through a grid of immobile sites. A free particle in
/// cell `i` with `s` free sites binds with probability `1 − exp(−k₁s·dt)`; a
/// bound one unbinds with probability `1 − exp(−k₋₁dt)` and resumes from
/// the centre of its cell. Absorbing walls remove particles whose bridge
/// touches the wall.
///
/// The step must resolve cells and reactions: `2D·dt/Δx² ≤ 0.5`,
/// `k₁·max S₀·dt ≤ 0.5` and `k₋₁dt ≤ 0.5`, otherwise a stability error is
/// returned. Accuracy needs these well below the limits.
pub fn simulate_model1(problem: &MasterProblem, config: McConfig) -> Result<Model1Mc> {
    problem.validate()?;
    config.check()?;
    let grid = &problem.grid;
    let d = problem.diffusion;
    let dt = config.dt;
    let (k1, km1) = (problem.rates.k1, problem.rates.k_minus1);
    check_steps(
        "2D·dt/Δx²",
        2.0 * d * dt / (grid.dx * grid.dx),
        MAX_CELL_COURANT,
    )?;
    check_steps(
        "k₁·S_max·dt",
        k1 * f64::from(problem.sites.max()) * dt,
        MAX_RATE_DT,
    )?;
    check_steps("k₋₁·dt", km1 * dt, MAX_RATE_DT)?;
    let start = WeightedIndex::new(&problem.initial.density)
        .map_err(|e| Error::Invalid(format!("initial distribution: {e}")))?;

    let sigma = (2.0 * d * dt).sqrt();
    let length = grid.length;
    let walls = problem.boundary;
    let steps = config.steps();
    let t = config.record_times();
    let unbind = 1.0 - (-km1 * dt).exp();

    let runs = run_replicas(config.replicas, config.seed, |rng| {
        let mut free_sites = problem.sites.counts.clone();
        let mut particles: Vec<Particle> = (0..problem.initial.particles)
            .map(|_| {
                let cell = start.sample(rng);
                Particle::Free((cell as f64 + rng.gen::<f64>()) * grid.dx)
            })
            .collect();
        let mut bound_path = Vec::with_capacity(t.len());
        let mut free_path = Vec::with_capacity(t.len());
        let mut bound = 0usize;
        let tally = |bound: usize, particles: &[Particle], bp: &mut Vec<f64>, fp: &mut Vec<f64>| {
            bp.push(bound as f64);
            fp.push(
                particles
                    .iter()
                    .filter(|p| matches!(p, Particle::Free(_)))
                    .count() as f64,
            );
        };
        tally(bound, &particles, &mut bound_path, &mut free_path);
        let mut avg = 0.0;
        let mut avg_n = 0usize;
        for step in 1..=steps {
            for p in particles.iter_mut() {
                match *p {
                    Particle::Bound(cell) => {
                        if rng.gen::<f64>() < unbind {
                            free_sites[cell] += 1;
                            bound -= 1;
                            *p = Particle::Free(grid.centers[cell]);
                        }
                    }
                    Particle::Free(x) => {
                        let mut y = x + sigma * normal(rng);
                        let hit_left = walls.left == Wall::Absorbing
                            && (y <= 0.0
                                || rng.gen::<f64>() < (-2.0 * x * y / (sigma * sigma)).exp());
                        let hit_right = walls.right == Wall::Absorbing
                            && (y >= length
                                || rng.gen::<f64>()
                                    < (-2.0 * (length - x) * (length - y) / (sigma * sigma)).exp());
                        if hit_left || hit_right {
                            *p = Particle::Gone;
                            continue;
                        }
                        y = fold(y, length);
                        let cell = grid.cell_of(y);
                        let s = free_sites[cell];
                        if s > 0 && rng.gen::<f64>() < 1.0 - (-k1 * f64::from(s) * dt).exp() {
                            free_sites[cell] -= 1;
                            bound += 1;
                            *p = Particle::Bound(cell);
                        } else {
                            *p = Particle::Free(y);
                        }
                    }
                    Particle::Gone => {}
                }
            }
            if 2 * step >= steps {
                avg += bound as f64;
                avg_n += 1;
            }
            if config.records(step, steps) {
                tally(bound, &particles, &mut bound_path, &mut free_path);
            }
        }
        (bound_path, free_path, avg / avg_n.max(1) as f64)
    });

    let bound_paths: Vec<Vec<f64>> = runs.iter().map(|r| r.0.clone()).collect();
    let free_paths: Vec<Vec<f64>> = runs.iter().map(|r| r.1.clone()).collect();
    Ok(Model1Mc {
        bound: TimeSeriesStats::from_paths(t.clone(), &bound_paths, config.seed),
        free: TimeSeriesStats::from_paths(t, &free_paths, config.seed),
        time_averaged_bound: EnsembleStats::from_samples(
            runs.iter().map(|r| r.2).collect(),
            config.seed,
        ),
    })
}

/// Particles on `[0, L]` binding to `sites` channels at `x = 0`; the wall at
/// `L` reflects. Starts with every particle free and uniformly placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMcParams {
    pub interval: Interval1D,
    pub rates: ReactionRates,
    pub sites: u32,
    pub particles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMc {
    /// Open (bound) channel count against time.
    pub open: TimeSeriesStats,
    /// Interior particle count against time.
    pub interior: TimeSeriesStats,
    /// Per-replica time average of the open count over `t ≥ t_end/2`.
    pub time_averaged_open: EnsembleStats,
    /// Largest `|interior + open − M₀|` seen in any replica.
    pub max_conservation_error: f64,
}

/// Boundary binding by the crossing rule: a step whose endpoint leaves
/// through `x = 0` binds with probability `k₁·F·√(π·dt/D)` when `F` channels
/// are free, and is reflected otherwise. A bound particle unbinds with
/// probability `1 − exp(−k₋₁dt)` and restarts at the wall. `k₁S₀√(π·dt/D)`
/// must not exceed 0.5.
pub fn simulate_boundary_binding(
    params: &BoundaryMcParams,
    config: McConfig,
) -> Result<BoundaryMc> {
    params.interval.validate()?;
    params.rates.validate()?;
    config.check()?;
    let (l, d) = (params.interval.length, params.interval.diffusion);
    let dt = config.dt;
    let commit = params.rates.k1 * (std::f64::consts::PI * dt / d).sqrt();
    check_steps(
        "k₁·S₀·√(π·dt/D)",
        commit * f64::from(params.sites),
        MAX_RATE_DT,
    )?;
    check_steps("k₋₁·dt", params.rates.k_minus1 * dt, MAX_RATE_DT)?;
    let sigma = (2.0 * d * dt).sqrt();
    if sigma > 0.25 * l {
        return Err(Error::Stability(format!(
            "step spread {sigma:.3e} not small against L = {l}"
        )));
    }
    let unbind = 1.0 - (-params.rates.k_minus1 * dt).exp();
    let steps = config.steps();
    let t = config.record_times();
    let m0 = params.particles as usize;

    let runs = run_replicas(config.replicas, config.seed, |rng| {
        let mut xs: Vec<f64> = (0..m0).map(|_| rng.gen::<f64>() * l).collect();
        let mut open = 0u32;
        let mut open_path = vec![0.0];
        let mut interior_path = vec![m0 as f64];
        let mut worst: f64 = 0.0;
        let mut avg = 0.0;
        let mut avg_n = 0usize;
        for step in 1..=steps {
            let mut released = 0;
            for _ in 0..open {
                if rng.gen::<f64>() < unbind {
                    released += 1;
                }
            }
            let mut i = 0;
            while i < xs.len() {
                let y = xs[i] + sigma * normal(rng);
                if y < 0.0 && rng.gen::<f64>() < commit * f64::from(params.sites - open) {
                    open += 1;
                    xs.swap_remove(i);
                    continue;
                }
                xs[i] = fold(y, l);
                i += 1;
            }
            // released particles restart at the wall for the next step
            open -= released;
            xs.extend(std::iter::repeat_n(0.0, released as usize));
            worst = worst.max((xs.len() as f64 + f64::from(open) - m0 as f64).abs());
            if 2 * step >= steps {
                avg += f64::from(open);
                avg_n += 1;
            }
            if config.records(step, steps) {
                open_path.push(f64::from(open));
                interior_path.push(xs.len() as f64);
            }
        }
        (open_path, interior_path, avg / avg_n.max(1) as f64, worst)
    });
    let open_paths: Vec<Vec<f64>> = runs.iter().map(|r| r.0.clone()).collect();
    let interior_paths: Vec<Vec<f64>> = runs.iter().map(|r| r.1.clone()).collect();
    Ok(BoundaryMc {
        open: TimeSeriesStats::from_paths(t.clone(), &open_paths, config.seed),
        interior: TimeSeriesStats::from_paths(t, &interior_paths, config.seed),
        time_averaged_open: EnsembleStats::from_samples(
            runs.iter().map(|r| r.2).collect(),
            config.seed,
        ),
        max_conservation_error: runs.iter().map(|r| r.3).fold(0.0, f64::max),
    })
}

/// How the point sink `k₁δ(x − x₁)` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SinkModel {
    /// Kill with probability `1 − exp(−k₁ℓ)`, `ℓ` the local time at `x₁`
    /// sampled exactly from the Brownian bridge of each step.
    #[default]
    LocalTime,
    /// Kill rate `k₁/|B|` inside the bin `B = [x₁ − h, x₁ + h] ∩ [0, L]`.
    Bin { halfwidth: f64 },
}

/// Per-step killing for a single sink.
struct Sink {
    model: SinkModel,
    length: f64,
    diffusion: f64,
    k1: f64,
    images: [f64; 3],
    bin: (f64, f64, f64),
}

impl Sink {
    fn new(params: &PushPullParams, model: SinkModel, dt: f64) -> Result<Self> {
        let (l, d) = (params.interval.length, params.interval.diffusion);
        let x1 = params.sink;
        let sigma = (2.0 * d * dt).sqrt();
        if 8.0 * sigma > l {
            return Err(Error::Stability(format!(
                "step spread {sigma:.3e} not small against L = {l}"
            )));
        }
        let mut bin = (0.0, 0.0, 0.0);
        match model {
            SinkModel::LocalTime => {
                let gap = x1.min(l - x1);
                if gap > 0.0 && gap < 4.0 * sigma {
                    return Err(Error::Invalid(format!(
                        "sink at distance {gap:.3e} from a wall needs dt with √(2D·dt) < {:.3e}, or the bin model",
                        gap / 4.0
                    )));
                }
            }
            SinkModel::Bin { halfwidth: h } => {
                check_positive("sink halfwidth", h)?;
                if h > 0.25 * l {
                    return Err(Error::Invalid(format!(
                        "sink halfwidth {h} not small against L = {l}"
                    )));
                }
                if sigma > 0.5 * h {
                    return Err(Error::Invalid(format!(
                        "sink halfwidth {h} is not resolved by dt = {dt}: need √(2D·dt) ≤ h/2"
                    )));
                }
                let (lo, hi) = ((x1 - h).max(0.0), (x1 + h).min(l));
                bin = (lo, hi, params.k1 / (hi - lo));
            }
        }
        Ok(Self {
            model,
            length: l,
            diffusion: d,
            k1: params.k1,
            images: [x1, -x1, 2.0 * l - x1],
            bin,
        })
    }

    /// Advances one particle for `h`; `None` means it was removed.
    fn step(&self, x: f64, h: f64, rng: &mut ChaCha8Rng) -> Option<f64> {
        let var = 2.0 * self.diffusion * h;
        let y = x + var.sqrt() * normal(rng);
        match self.model {
            SinkModel::LocalTime => {
                if self.k1 > 0.0 {
                    // P(λ > l) = exp(−[(|x−z| + |y−z| + l)² − (y−x)²]/(2 var)) at each image z
                    let r = ((y - x).powi(2) - 2.0 * var * open_uniform(rng).ln()).sqrt();
                    let lambda: f64 = self
                        .images
                        .iter()
                        .map(|z| (r - (x - z).abs() - (y - z).abs()).max(0.0))
                        .sum();
                    if lambda > 0.0
                        && rng.gen::<f64>()
                            < 1.0 - (-self.k1 * lambda / (2.0 * self.diffusion)).exp()
                    {
                        return None;
                    }
                }
                Some(fold(y, self.length))
            }
            SinkModel::Bin { .. } => {
                let y = fold(y, self.length);
                let (lo, hi, rate) = self.bin;
                if (lo..=hi).contains(&y) && rng.gen::<f64>() < 1.0 - (-rate * h).exp() {
                    return None;
                }
                Some(y)
            }
        }
    }

    fn inject(&self, injection: Injection, rng: &mut ChaCha8Rng) -> f64 {
        match injection {
            Injection::At(y) => y,
            Injection::Uniform => rng.gen::<f64>() * self.length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushPullMc {
    /// Particle count `N(t)`.
    pub count: TimeSeriesStats,
    /// `N(t_end)` per replica: its mean and variance estimate the steady
    /// state when `t_end` is long against the slowest decay.
    pub steady: EnsembleStats,
    pub sink: SinkModel,
    pub dt: f64,
}

/// One particle at the injection site at `t = 0`, then Poisson(`γ`)
/// injections, each starting at a uniformly drawn instant inside its step.
pub fn simulate_pushpull(
    params: &PushPullParams,
    sink: SinkModel,
    config: McConfig,
) -> Result<PushPullMc> {
    params.validate()?;
    config.check()?;
    let killer = Sink::new(params, sink, config.dt)?;
    let dt = config.dt;
    let steps = config.steps();
    let t = config.record_times();
    let arrivals = if params.gamma > 0.0 {
        Some(Poisson::new(params.gamma * dt).map_err(|e| Error::Invalid(e.to_string()))?)
    } else {
        None
    };

    let runs = run_replicas(config.replicas, config.seed, |rng| {
        let mut xs = vec![killer.inject(params.injection, rng)];
        let mut path = Vec::with_capacity(t.len());
        path.push(1.0);
        let mut next = Vec::new();
        for step in 1..=steps {
            next.clear();
            for &x in &xs {
                if let Some(y) = killer.step(x, dt, rng) {
                    next.push(y);
                }
            }
            if let Some(p) = &arrivals {
                let k = p.sample(rng) as usize;
                for _ in 0..k {
                    let x = killer.inject(params.injection, rng);
                    let remaining = dt * rng.gen::<f64>();
                    if let Some(y) = killer.step(x, remaining, rng) {
                        next.push(y);
                    }
                }
            }
            std::mem::swap(&mut xs, &mut next);
            if config.records(step, steps) {
                path.push(xs.len() as f64);
            }
        }
        path
    });
    let last: Vec<f64> = runs.iter().map(|p| *p.last().unwrap()).collect();
    Ok(PushPullMc {
        count: TimeSeriesStats::from_paths(t, &runs, config.seed),
        steady: EnsembleStats::from_samples(last, config.seed),
        sink,
        dt,
    })
}

/// Empirical survival of a single injected particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub t: Vec<f64>,
    pub survival: Vec<f64>,
    /// Binomial `√(Ŝ(1 − Ŝ)/R)`.
    pub std_error: Vec<f64>,
    pub survivors: Vec<usize>,
    /// Per-replica lifetime; `None` if still alive at the last grid time.
    pub lifetimes: Vec<Option<f64>>,
    pub replicas: usize,
    pub seed: u64,
}

/// Simulates `replicas` lifetimes up to the last grid time. A particle
/// removed during a step is assigned the step midpoint as lifetime.
pub fn estimate_survival(
    params: &PushPullParams,
    t_grid: &[f64],
    sink: SinkModel,
    dt: f64,
    replicas: usize,
    seed: u64,
) -> Result<SurvivalCurve> {
    params.validate()?;
    check_positive("dt", dt)?;
    if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Invalid(
            "survival grid must be non-empty with finite times >= 0".into(),
        ));
    }
    if replicas == 0 {
        return Err(Error::Invalid("at least one replica is required".into()));
    }
    let killer = Sink::new(params, sink, dt)?;
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let steps = (t_max / dt).ceil() as usize;
    let lifetimes = run_replicas(replicas, seed, |rng| {
        let mut x = killer.inject(params.injection, rng);
        for step in 0..steps {
            match killer.step(x, dt, rng) {
                Some(y) => x = y,
                None => return (step as f64 + 0.5) * dt,
            }
        }
        f64::INFINITY
    });
    let lifetimes: Vec<Option<f64>> = lifetimes
        .into_iter()
        .map(|l| l.is_finite().then_some(l))
        .collect();
    let r = replicas as f64;
    let survivors: Vec<usize> = t_grid
        .iter()
        .map(|&t| {
            lifetimes
                .iter()
                .filter(|life| life.is_none_or(|l| l > t))
                .count()
        })
        .collect();
    let survival: Vec<f64> = survivors.iter().map(|&n| n as f64 / r).collect();
    Ok(SurvivalCurve {
        t: t_grid.to_vec(),
        std_error: survival
            .iter()
            .map(|s| (s * (1.0 - s) / r).sqrt())
            .collect(),
        survival,
        survivors,
        lifetimes,
        replicas,
        seed,
    })
}

/// `α̂ = −slope` of the least-squares line through `ln Ŝ(t)` over the last
/// decade `t ≥ t_max/10`, using grid times with at least
/// [`MIN_FIT_SURVIVORS`] survivors.
pub fn fit_decay_rate(curve: &SurvivalCurve) -> Result<f64> {
    let t_max = curve.t.iter().copied().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = curve
        .t
        .iter()
        .zip(&curve.survivors)
        .zip(&curve.survival)
        .filter(|((&t, &n), _)| t > 0.0 && t >= 0.1 * t_max && n >= MIN_FIT_SURVIVORS)
        .map(|((&t, _), &s)| (t, s.ln()))
        .collect();
    let span = pts.last().map_or(0.0, |p| p.0) - pts.first().map_or(0.0, |p| p.0);
    if pts.len() < 3 || span < 0.25 * t_max {
        return Err(Error::TooFewSurvivors(format!(
            "{} usable grid times spanning {span:.3} of {t_max:.3}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}
