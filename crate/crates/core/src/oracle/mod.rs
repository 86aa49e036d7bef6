//! Brute-force stochastic simulators used to referee the analytic routes.
//!
//! Every simulator runs independent replicas, each with its own ChaCha8
//! stream derived from a master seed, so identical `(seed, parameters)` give
//! bit-identical results regardless of thread count.

mod brownian;
mod jumps;

pub use brownian::{
    estimate_survival, fit_decay_rate, simulate_boundary_binding, simulate_model1,
    simulate_pushpull, BoundaryMc, BoundaryMcParams, Model1Mc, PushPullMc, SinkModel,
    SurvivalCurve, MIN_FIT_SURVIVORS,
};
pub use jumps::{gillespie_birth_death, gillespie_mm, BirthDeathMc, JumpTally, MmMc};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Pairwise merge; associative up to rounding.
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64;
        self.count = n;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Pooled statistics of one scalar observable over replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub replicas: usize,
    pub seed: u64,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Sample standard deviation over `√R`.
    pub std_error: f64,
}

impl EnsembleStats {
    pub fn from_samples(samples: Vec<f64>, seed: u64) -> Self {
        let mut w = Welford::default();
        samples.iter().for_each(|&x| w.push(x));
        Self {
            replicas: samples.len(),
            seed,
            mean: w.mean,
            variance: w.variance(),
            std_error: w.std_error(),
            samples,
        }
    }

    /// `|mean − reference| ≤ bands · std_error`.
    pub fn within(&self, reference: f64, bands: f64) -> bool {
        (self.mean - reference).abs() <= bands * self.std_error
    }
}

/// Per-time pooled statistics of a recorded trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesStats {
    pub replicas: usize,
    pub seed: u64,
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl TimeSeriesStats {
    /// `paths[r][j]` is replica `r` at time `t[j]`.
    pub fn from_paths(t: Vec<f64>, paths: &[Vec<f64>], seed: u64) -> Self {
        let mut acc = vec![Welford::default(); t.len()];
        for path in paths {
            for (w, &x) in acc.iter_mut().zip(path) {
                w.push(x);
            }
        }
        Self {
            replicas: paths.len(),
            seed,
            mean: acc.iter().map(|w| w.mean).collect(),
            variance: acc.iter().map(Welford::variance).collect(),
            std_error: acc.iter().map(Welford::std_error).collect(),
            t,
        }
    }
}

/// Time grid and replica schedule shared by the particle simulators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub t_end: f64,
    pub dt: f64,
    /// Record every this many steps (the final step is always recorded).
    pub record_every: usize,
    pub replicas: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(
        t_end: f64,
        dt: f64,
        record_every: usize,
        replicas: usize,
        seed: u64,
    ) -> Result<Self> {
        let c = Self {
            t_end,
            dt,
            record_every,
            replicas,
            seed,
        };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::NonPositive {
                name: "dt",
                value: self.dt,
            });
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::NonPositive {
                name: "t_end",
                value: self.t_end,
            });
        }
        if self.record_every == 0 {
            return Err(Error::Invalid("record_every must be at least 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Invalid("at least one replica is required".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }

    /// Recorded times, starting at 0.
    pub fn record_times(&self) -> Vec<f64> {
        let steps = self.steps();
        std::iter::once(0.0)
            .chain(
                (1..=steps)
                    .filter(|s| self.records(*s, steps))
                    .map(|s| s as f64 * self.dt),
            )
            .collect()
    }

    fn records(&self, step: usize, steps: usize) -> bool {
        step.is_multiple_of(self.record_every) || step == steps
    }
}

/// Stream `replica` of the master seed.
pub fn replica_rng(seed: u64, replica: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica as u64);
    rng
}

/// Runs `f` once per replica in parallel; results come back in replica order.
pub fn run_replicas<T: Send>(
    replicas: usize,
    seed: u64,
    f: impl Fn(&mut ChaCha8Rng) -> T + Sync,
) -> Vec<T> {
    (0..replicas)
        .into_par_iter()
        .map(|r| f(&mut replica_rng(seed, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let a: f64 = replica_rng(7, 0).gen();
        let b: f64 = replica_rng(7, 1).gen();
        assert_ne!(a, b);
        assert_eq!(a, replica_rng(7, 0).gen::<f64>());
    }

    #[test]
    fn record_times_include_end() {
        let c = McConfig::new(1.0, 0.3, 2, 1, 0).unwrap();
        // 3 steps of 0.3
        let t = c.record_times();
        assert_eq!(t.len(), 3);
        assert!((t[2] - 0.9).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in prop::collection::vec(-100.0f64..100.0, 2..60), split in 0usize..60) {
            let split = split.min(xs.len());
            let mut all = Welford::default();
            xs.iter().for_each(|&x| all.push(x));
            let mut a = Welford::default();
            let mut b = Welford::default();
            xs[..split].iter().for_each(|&x| a.push(x));
            xs[split..].iter().for_each(|&x| b.push(x));
            a.merge(&b);
            prop_assert_eq!(a.count, all.count);
            prop_assert!((a.mean - all.mean).abs() < 1e-9);
            prop_assert!((a.variance() - all.variance()).abs() < 1e-7 * (1.0 + all.variance()));
        }
    }
}
