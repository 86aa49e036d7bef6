//! Fast smoke checks of each analytic route against known values.

use microchem::markov::{mm_master, stationary_dist, BirthDeathSpec, MMSpec};
use microchem::pde_master::{fraction_bound, variance_bound};
use microchem::renewal::{
    continuum_profile, green_laplace, green_laplace_closed, mean_transient, steady_mean, Injection,
    PushPullParams,
};
use microchem::Interval1D;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, got: f64, want: f64, tol: f64) -> Check {
    Check {
        name,
        passed: (got - want).abs() <= tol,
        detail: format!("got {got:.12e}, expected {want:.12e} (tol {tol:e})"),
    }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        detail: e.to_string(),
    }
}

pub fn run_checks() -> Vec<Check> {
    let mut out = vec![
        check("fraction_bound(2)", fraction_bound(2.0), 0.5, 1e-12),
        check("fraction_bound(6)", fraction_bound(6.0), 1.0 / 3.0, 1e-12),
        check("variance_bound peak", variance_bound(2.0), 0.25, 1e-12),
    ];

    let spec = BirthDeathSpec {
        channels: 1,
        agonists: 1,
        tau1: 1.0,
        k_minus1: 1.0,
    };
    out.push(match stationary_dist(&spec) {
        Ok(s) => check("two-state channel variance", s.variance_open, 0.25, 1e-12),
        Err(e) => failed("two-state channel variance", e),
    });

    let gamma = 0.7;
    out.push(match mean_transient(&|_| 1.0, gamma, 10.0 / gamma, 1e-2) {
        Ok(c) => check(
            "renewal without killing",
            *c.mean.last().unwrap(),
            11.0,
            1e-6,
        ),
        Err(e) => failed("renewal without killing", e),
    });

    let interval = Interval1D::normalized();
    out.push(
        match (
            green_laplace(0.3, 1.1, 0.8, &interval, None),
            green_laplace_closed(0.3, 1.1, 0.8, &interval),
        ) {
            (Ok(a), Ok(b)) => check("resolvent series vs closed form", a, b, 1e-9),
            (Err(e), _) | (_, Err(e)) => failed("resolvent series vs closed form", e),
        },
    );

    let params = PushPullParams {
        interval: Interval1D {
            length: 1.0,
            diffusion: 1.0,
        },
        sink: 0.0,
        injection: Injection::Uniform,
        gamma: 1.0,
        k1: 1.0,
    };
    out.push(match steady_mean(&params) {
        Ok(s) => check("push-pull steady mean", s.value, 4.0 / 3.0, 1e-12),
        Err(e) => failed("push-pull steady mean", e),
    });
    out.push(match continuum_profile(&params, 11) {
        Ok(p) => check("continuum total", p.total, 4.0 / 3.0, 1e-12),
        Err(e) => failed("continuum total", e),
    });

    let mm = MMSpec {
        substrate: 3,
        enzymes: 1,
        k_minus1: 1.0,
        k2: 1.0,
        tau1: 1.0,
    };
    out.push(match mm_master(&mm, 60.0, 0.5) {
        Ok(t) => check(
            "Michaelis-Menten completion",
            *t.mean_product.last().unwrap(),
            3.0,
            1e-6,
        ),
        Err(e) => failed("Michaelis-Menten completion", e),
    });
    out
}
