//! Small numerical kernels shared by the solvers.

/// Pre-factorized tridiagonal system `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`
/// (Thomas algorithm). Only stable for diagonally dominant matrices, which is
/// all the implicit diffusion operators here produce.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Tridiagonal {
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Self {
        let n = diag.len();
        debug_assert!(lower.len() == n && upper.len() == n);
        let mut c_prime = vec![0.0; n];
        let mut denom = vec![0.0; n];
        for i in 0..n {
            let d = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i] * c_prime[i - 1]
            };
            denom[i] = d;
            c_prime[i] = if i + 1 < n { upper[i] / d } else { 0.0 };
        }
        Self {
            lower: lower.to_vec(),
            c_prime,
            denom,
        }
    }

    /// Solves in place: `rhs` becomes the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        if n == 0 {
            return;
        }
        rhs[0] /= self.denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

/// One-shot tridiagonal solve.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    Tridiagonal::factor(lower, diag, upper).solve_in_place(rhs);
}

/// Exact solution after time `t` of the scalar Riccati equation
/// `y' = a0 + a1·y + a2·y²` started at `y0`, assuming the quadratic has a
/// real root that is stable (negative slope) and `y0` lies in its basin.
pub fn riccati_step(y0: f64, a0: f64, a1: f64, a2: f64, t: f64) -> f64 {
    if a2 == 0.0 {
        if a1 == 0.0 {
            return y0 + a0 * t;
        }
        let fixed = -a0 / a1;
        return fixed + (y0 - fixed) * (a1 * t).exp();
    }
    let disc = (a1 * a1 - 4.0 * a0 * a2).max(0.0);
    let delta = disc.sqrt();
    // stable root: slope a1 + 2 a2 r = -delta
    let root = if delta - a1 > 0.0 {
        2.0 * a0 / (delta - a1)
    } else {
        (-a1 - delta) / (2.0 * a2)
    };
    let u0 = y0 - root;
    if delta == 0.0 {
        return root + u0 / (1.0 - a2 * u0 * t);
    }
    let decay = (-delta * t).exp();
    let growth = -(-delta * t).exp_m1();
    root + u0 * delta * decay / (delta - a2 * u0 * growth)
}

/// Kahan-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Log of `Σ exp(x_i)` without overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += lower[i] * x[i - 1];
                }
                if i < 3 {
                    v += upper[i] * x[i + 1];
                }
                v
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        for (a, b) in rhs.iter().zip(x) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    fn rk4_reference(y0: f64, a0: f64, a1: f64, a2: f64, t: f64) -> f64 {
        let f = |y: f64| a0 + a1 * y + a2 * y * y;
        let n = 20_000;
        let h = t / n as f64;
        let mut y = y0;
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    #[test]
    fn riccati_matches_rk4() {
        // binding-like: y' = k(c - y) - K y^2
        let cases = [
            (0.0, 2.0, -2.0, -3.0, 0.7),
            (1.0, 0.5, -0.5, -10.0, 2.0),
            (0.3, 0.0, -1.0, 0.0, 1.5),
            (0.2, 1.0, 0.0, 0.0, 1.0),
            // boundary-exchange-like: positive quadratic coefficient
            (0.0, 3.0, -5.0, 0.5, 1.3),
        ];
        for (y0, a0, a1, a2, t) in cases {
            let exact = riccati_step(y0, a0, a1, a2, t);
            let reference = rk4_reference(y0, a0, a1, a2, t);
            assert!(
                (exact - reference).abs() < 1e-10,
                "{exact} vs {reference} for {:?}",
                (y0, a0, a1, a2, t)
            );
        }
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [1000.0, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
