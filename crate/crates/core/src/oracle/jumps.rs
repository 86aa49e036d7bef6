//! Exact event-driven simulation of the finite chains.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{run_replicas, EnsembleStats, TimeSeriesStats, Welford};
use crate::error::{Error, Result};
use crate::markov::{binding_rate, BirthDeathSpec, MMSpec};
use crate::params::Validate;

/// Current state, event clock and time spent in each state since `from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpTally {
    pub state: usize,
    pub clock: f64,
    pub from: f64,
    pub occupancy: Vec<f64>,
    pub events: u64,
}

impl JumpTally {
    fn new(state: usize, states: usize, from: f64) -> Self {
        Self {
            state,
            clock: 0.0,
            from,
            occupancy: vec![0.0; states],
            events: 0,
        }
    }

    /// Credits `[clock, until)` to the current state, clipped below at `from`.
    fn hold(&mut self, until: f64) {
        let start = self.clock.max(self.from);
        if until > start {
            self.occupancy[self.state] += until - start;
        }
        self.clock = until;
    }

    pub fn elapsed(&self) -> f64 {
        self.occupancy.iter().sum()
    }
}

/// Runs one trajectory to `t_end`. `moves` fills `(next, rate)` pairs;
/// `on_hold(state, t0, t1)` sees every holding interval.
fn run<S: Copy>(
    mut state: S,
    t_end: f64,
    rng: &mut ChaCha8Rng,
    moves: impl Fn(S, &mut Vec<(S, f64)>),
    mut on_hold: impl FnMut(S, f64, f64),
) -> u64 {
    let mut t = 0.0;
    let mut events = 0;
    let mut out = Vec::new();
    loop {
        out.clear();
        moves(state, &mut out);
        let total: f64 = out.iter().map(|m| m.1).sum();
        let wait = if total > 0.0 {
            rng.sample::<f64, _>(Exp1) / total
        } else {
            f64::INFINITY
        };
        let next_t = (t + wait).min(t_end);
        on_hold(state, t, next_t);
        if next_t >= t_end {
            return events;
        }
        t = next_t;
        let mut pick = rng.gen::<f64>() * total;
        let mut chosen = out[out.len() - 1].0;
        for &(s, r) in &out {
            if pick < r {
                chosen = s;
                break;
            }
            pick -= r;
        }
        state = chosen;
        events += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathMc {
    pub k_min: u32,
    /// Mean over replicas of the fraction of `[burn_in, t_end]` spent with
    /// `k = k_min + i` free channels.
    pub occupancy: Vec<f64>,
    pub occupancy_std_error: Vec<f64>,
    /// Per-replica time-averaged open-channel count.
    pub mean_open: EnsembleStats,
    /// Open-channel variance from the pooled occupancy.
    pub variance_open: f64,
    pub events: u64,
}

/// Exact simulation from `k = S` with rates `λ_k` down and `k₋₁(S − k)` up;
/// occupancy is tallied over `[burn_in, t_end]`.
pub fn gillespie_birth_death(
    spec: &BirthDeathSpec,
    t_end: f64,
    burn_in: f64,
    replicas: usize,
    seed: u64,
) -> Result<BirthDeathMc> {
    spec.validate()?;
    if !(t_end > burn_in && burn_in >= 0.0 && t_end.is_finite()) {
        return Err(Error::Invalid(format!(
            "need 0 <= burn_in < t_end, got {burn_in} and {t_end}"
        )));
    }
    if replicas == 0 {
        return Err(Error::Invalid("at least one replica is required".into()));
    }
    let lo = spec.k_min();
    let s = spec.channels;
    let n = (s - lo + 1) as usize;
    let down: Vec<f64> = (lo..=s)
        .map(|k| binding_rate(k, spec))
        .collect::<Result<_>>()?;
    let tallies = run_replicas(replicas, seed, |rng| {
        let mut tally = JumpTally::new(n - 1, n, burn_in);
        tally.events = run(
            n - 1,
            t_end,
            rng,
            |i, out| {
                if i > 0 {
                    out.push((i - 1, down[i]));
                }
                if i + 1 < n {
                    out.push((i + 1, spec.k_minus1 * f64::from(s - lo - i as u32)));
                }
            },
            |i, _, t1| {
                tally.state = i;
                tally.hold(t1);
            },
        );
        tally
    });
    let span = t_end - burn_in;
    let mut acc = vec![Welford::default(); n];
    let mut open_samples = Vec::with_capacity(replicas);
    for tally in &tallies {
        let mut open = 0.0;
        for (i, w) in acc.iter_mut().enumerate() {
            let f = tally.occupancy[i] / span;
            w.push(f);
            open += f * f64::from(s - lo - i as u32);
        }
        open_samples.push(open);
    }
    let occupancy: Vec<f64> = acc.iter().map(|w| w.mean).collect();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (i, p) in occupancy.iter().enumerate() {
        let open = f64::from(s - lo - i as u32);
        m1 += open * p;
        m2 += open * open * p;
    }
    Ok(BirthDeathMc {
        k_min: lo,
        occupancy_std_error: acc.iter().map(Welford::std_error).collect(),
        occupancy,
        mean_open: EnsembleStats::from_samples(open_samples, seed),
        variance_open: (m2 - m1 * m1).max(0.0),
        events: tallies.iter().map(|t| t.events).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmMc {
    /// Product count at the sample times.
    pub product: TimeSeriesStats,
    /// Bound enzyme count at the sample times.
    pub bound: TimeSeriesStats,
}

/// Exact simulation of binding, unbinding and catalysis from `(0, 0)`,
/// sampled at `times`.
pub fn gillespie_mm(spec: &MMSpec, times: &[f64], replicas: usize, seed: u64) -> Result<MmMc> {
    spec.validate()?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::Invalid(
            "sample times must be finite, >= 0 and sorted".into(),
        ));
    }
    if replicas == 0 {
        return Err(Error::Invalid("at least one replica is required".into()));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    let runs = run_replicas(replicas, seed, |rng| {
        let mut product = vec![0.0; times.len()];
        let mut bound = vec![0.0; times.len()];
        let mut j = 0;
        run(
            (0u32, 0u32),
            t_end,
            rng,
            |s, out| out.extend(spec.moves(s)),
            |(k, q), t0, t1| {
                while j < times.len() && times[j] >= t0 && (times[j] < t1 || t1 >= t_end) {
                    product[j] = f64::from(k);
                    bound[j] = f64::from(q);
                    j += 1;
                }
            },
        );
        (product, bound)
    });
    let products: Vec<Vec<f64>> = runs.iter().map(|r| r.0.clone()).collect();
    let bounds: Vec<Vec<f64>> = runs.iter().map(|r| r.1.clone()).collect();
    Ok(MmMc {
        product: TimeSeriesStats::from_paths(times.to_vec(), &products, seed),
        bound: TimeSeriesStats::from_paths(times.to_vec(), &bounds, seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::stationary_dist;

    #[test]
    fn two_state_half_half() {
        let spec = BirthDeathSpec {
            channels: 1,
            agonists: 1,
            tau1: 1.0,
            k_minus1: 1.0,
        };
        let mc = gillespie_birth_death(&spec, 200.0, 10.0, 100, 5).unwrap();
        for (p, se) in mc.occupancy.iter().zip(&mc.occupancy_std_error) {
            assert!((p - 0.5).abs() <= 3.0 * se, "{p} ± {se}");
        }
        let exact = stationary_dist(&spec).unwrap();
        assert!(mc.mean_open.within(exact.mean_open, 3.0));
    }

    #[test]
    fn no_agonists_never_moves() {
        let spec = BirthDeathSpec {
            channels: 4,
            agonists: 0,
            tau1: 1.0,
            k_minus1: 1.0,
        };
        let mc = gillespie_birth_death(&spec, 10.0, 0.0, 5, 1).unwrap();
        assert_eq!(mc.occupancy, vec![1.0]);
        assert_eq!(mc.events, 0);
    }

    #[test]
    fn occupancy_sums_to_elapsed() {
        let mut tally = JumpTally::new(0, 2, 1.0);
        tally.hold(0.5);
        tally.state = 1;
        tally.hold(2.5);
        tally.state = 0;
        tally.hold(3.0);
        assert_eq!(tally.occupancy, vec![0.5, 1.5]);
        assert_eq!(tally.elapsed(), 2.0);
    }

    #[test]
    fn mm_without_catalysis_makes_nothing() {
        let spec = MMSpec {
            substrate: 3,
            enzymes: 1,
            k_minus1: 1.0,
            k2: 0.0,
            tau1: 1.0,
        };
        let mc = gillespie_mm(&spec, &[0.0, 1.0, 5.0], 20, 2).unwrap();
        assert!(mc.product.mean.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn mm_converts_everything() {
        let spec = MMSpec {
            substrate: 5,
            enzymes: 2,
            k_minus1: 1.0,
            k2: 1.0,
            tau1: 1.0,
        };
        let mc = gillespie_mm(&spec, &[0.0, 200.0], 50, 3).unwrap();
        assert_eq!(mc.product.mean[0], 0.0);
        assert_eq!(mc.product.mean[1], 5.0);
        assert_eq!(mc.product.variance[1], 0.0);
    }
}
