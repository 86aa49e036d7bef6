//! Finite continuous-time Markov chains stored as transition lists.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest state space accepted by the dense stationary solve.
pub const DENSE_LIMIT: usize = 4_000;
/// Largest chain propagated by a dense matrix exponential.
pub const EXPM_LIMIT: usize = 300;
/// Largest state space accepted at all.
pub const STATE_LIMIT: usize = 1_000_000;

/// Generator `Q` of a finite chain, kept as `(from, to, rate)` triples plus
/// total exit rates.
#[derive(Debug, Clone)]
pub struct Generator {
    n: usize,
    transitions: Vec<(usize, usize, f64)>,
    exit: Vec<f64>,
}

impl Generator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            transitions: Vec::new(),
            exit: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn add(&mut self, from: usize, to: usize, rate: f64) {
        if rate > 0.0 && from != to {
            self.transitions.push((from, to, rate));
            self.exit[from] += rate;
        }
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    /// `out = Qᵀp`, the time derivative of the distribution `p`.
    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        for (o, (pi, e)) in out.iter_mut().zip(p.iter().zip(&self.exit)) {
            *o = -e * pi;
        }
        for &(from, to, rate) in &self.transitions {
            out[to] += rate * p[from];
        }
    }

    /// Max-norm of `Qᵀp`.
    pub fn residual(&self, p: &[f64]) -> f64 {
        let mut out = vec![0.0; self.n];
        self.apply(p, &mut out);
        out.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Stationary distribution from a dense LU solve of `Qᵀπ = 0` with one
    /// balance row replaced by `Σπ = 1`. Needs an irreducible chain.
    pub fn stationary_dense(&self) -> Result<Vec<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::StateSpaceTooLarge(self.n));
        }
        let n = self.n;
        let mut a = self.dense_transpose();
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("stationary system of a reducible chain".into()))?;
        Ok(x.iter().map(|v| v.max(0.0)).collect())
    }

    /// Dense `Qᵀ`.
    fn dense_transpose(&self) -> DMatrix<f64> {
        let mut a = DMatrix::<f64>::zeros(self.n, self.n);
        for i in 0..self.n {
            a[(i, i)] = -self.exit[i];
        }
        for &(from, to, rate) in &self.transitions {
            a[(to, from)] += rate;
        }
        a
    }

    /// Integrates `ṗ = Qᵀp` and returns the distribution at every multiple
    /// of `dt` up to `t_end`. Small chains propagate with the exact
    /// `exp(Qᵀdt)`; larger ones use classical RK4 with sub-steps keeping
    /// `h·max exit rate ≤ 0.1`.
    pub fn integrate(&self, p0: &[f64], t_end: f64, dt: f64) -> Result<Vec<(f64, Vec<f64>)>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::NonPositive {
                name: "dt",
                value: dt,
            });
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::Invalid(format!("t_end must be >= 0, got {t_end}")));
        }
        let outputs = (t_end / dt).round() as usize;
        let mut out = Vec::with_capacity(outputs + 1);
        out.push((0.0, p0.to_vec()));
        if self.n <= EXPM_LIMIT {
            let prop = (self.dense_transpose() * dt).exp();
            let mut p = DVector::from_column_slice(p0);
            for step in 1..=outputs {
                p = &prop * &p;
                out.push((step as f64 * dt, check_leak(p.as_slice())?));
            }
            return Ok(out);
        }
        let subs = ((10.0 * dt * self.max_exit_rate()).ceil() as usize).max(1);
        let h = dt / subs as f64;
        let n = self.n;
        let mut p = p0.to_vec();
        let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut tmp = vec![0.0; n];
        for step in 1..=outputs {
            for _ in 0..subs {
                self.apply(&p, &mut k[0]);
                for stage in 1..4 {
                    let w = if stage == 3 { h } else { 0.5 * h };
                    for i in 0..n {
                        tmp[i] = p[i] + w * k[stage - 1][i];
                    }
                    let (_, rest) = k.split_at_mut(stage);
                    self.apply(&tmp, &mut rest[0]);
                }
                for i in 0..n {
                    p[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                }
            }
            out.push((step as f64 * dt, check_leak(&p)?));
        }
        Ok(out)
    }
}

fn check_leak(p: &[f64]) -> Result<Vec<f64>> {
    let leak = (p.iter().sum::<f64>() - 1.0).abs();
    if leak > 1e-8 {
        return Err(Error::ProbabilityLeak { leak });
    }
    Ok(p.to_vec())
}

/// Chain over labelled states, built by exploring everything reachable from
/// an initial state.
#[derive(Debug, Clone)]
pub struct LabelledChain<S> {
    pub states: Vec<S>,
    pub index: HashMap<S, usize>,
    pub generator: Generator,
}

impl<S: Copy + Eq + Hash> LabelledChain<S> {
    /// `moves(s)` lists `(next_state, rate)` pairs; zero rates are dropped.
    pub fn explore(initial: S, moves: impl Fn(S) -> Vec<(S, f64)>) -> Result<Self> {
        let mut states = vec![initial];
        let mut index = HashMap::from([(initial, 0usize)]);
        let mut edges = Vec::new();
        let mut cursor = 0;
        while cursor < states.len() {
            let s = states[cursor];
            for (next, rate) in moves(s) {
                if !(rate > 0.0) {
                    continue;
                }
                let j = match index.get(&next) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= STATE_LIMIT {
                            return Err(Error::StateSpaceTooLarge(states.len() + 1));
                        }
                        states.push(next);
                        index.insert(next, states.len() - 1);
                        states.len() - 1
                    }
                };
                edges.push((cursor, j, rate));
            }
            cursor += 1;
        }
        let mut generator = Generator::new(states.len());
        for (i, j, r) in edges {
            generator.add(i, j, r);
        }
        Ok(Self {
            states,
            index,
            generator,
        })
    }

    pub fn point_mass(&self, s: S) -> Vec<f64> {
        let mut p = vec![0.0; self.states.len()];
        if let Some(&i) = self.index.get(&s) {
            p[i] = 1.0;
        }
        p
    }

    /// `Σ f(s) p(s)`.
    pub fn expect(&self, p: &[f64], f: impl Fn(S) -> f64) -> f64 {
        self.states.iter().zip(p).map(|(&s, &w)| f(s) * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_chain() {
        let mut g = Generator::new(2);
        g.add(0, 1, 2.0);
        g.add(1, 0, 1.0);
        let pi = g.stationary_dense().unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!(g.residual(&pi) < 1e-14);
        let path = g.integrate(&[1.0, 0.0], 1.0, 0.1).unwrap();
        let (_, last) = path.last().unwrap();
        // p0(t) = 1/3 + 2/3 e^{-3t}
        let exact = 1.0 / 3.0 + 2.0 / 3.0 * (-3.0f64).exp();
        assert!((last[0] - exact).abs() < 1e-12);
        let mut chain = Generator::new(EXPM_LIMIT + 1);
        chain.add(0, 1, 2.0);
        chain.add(1, 0, 1.0);
        let mut p0 = vec![0.0; EXPM_LIMIT + 1];
        p0[0] = 1.0;
        let (_, last) = chain.integrate(&p0, 1.0, 0.1).unwrap().pop().unwrap();
        assert!((last[0] - exact).abs() < 1e-5, "{}", last[0] - exact);
    }

    #[test]
    fn exploration_finds_reachable_states() {
        let chain =
            LabelledChain::explore(0i32, |s| if s < 5 { vec![(s + 1, 1.0)] } else { vec![] })
                .unwrap();
        assert_eq!(chain.states.len(), 6);
        assert_eq!(chain.point_mass(3)[3], 1.0);
    }
}
