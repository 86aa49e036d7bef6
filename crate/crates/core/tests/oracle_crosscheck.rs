//! Simulators against analytic routes.

use microchem::markov::{mm_master, stationary_dist, BirthDeathSpec, MMSpec};
use microchem::oracle::{
    estimate_survival, gillespie_birth_death, gillespie_mm, simulate_boundary_binding,
    simulate_model1, simulate_pushpull, BoundaryMcParams, McConfig, SinkModel,
};
use microchem::pde_master::{fraction_bound, solve_boundary_binding, MasterProblem, TimeStepping};
use microchem::renewal::{
    steady_mean, steady_variance, survival_laplace, AlphaConvention, Injection, PushPullParams,
};
use microchem::{
    BoundaryCondition, Grid1D, InitialDistribution, Interval1D, ReactionRates, SiteDensity,
};

fn model1(cells: usize, sites: u32, particles: u32, k1: f64, km1: f64) -> MasterProblem {
    let grid = Grid1D::new(1.0, cells).unwrap();
    MasterProblem {
        sites: SiteDensity::uniform(&grid, sites),
        initial: InitialDistribution::uniform(&grid, particles),
        grid,
        diffusion: 1.0,
        rates: ReactionRates {
            k1,
            k_minus1: km1,
            ..Default::default()
        },
        boundary: BoundaryCondition::REFLECTING,
    }
}

#[test]
fn single_site_well_mixed_balance() {
    // one site in cell 0, one particle: stationary bound probability is
    // k_on/(k_on + k₋₁) with k_on = k₁/n, whatever D is
    let grid = Grid1D::new(1.0, 10).unwrap();
    let mut p = model1(10, 0, 1, 10.0, 1.0);
    p.sites = SiteDensity::on_cells(&grid, 1, 0..1);
    let mc = simulate_model1(&p, McConfig::new(40.0, 1e-3, 1000, 200, 11).unwrap()).unwrap();
    let k_on = 10.0 / 10.0;
    let expected = k_on / (k_on + 1.0);
    let est = &mc.time_averaged_bound;
    eprintln!(
        "single site: {} ± {} vs {expected}",
        est.mean, est.std_error
    );
    assert!(est.within(expected, 3.0));
}

#[test]
fn many_particles_mass_action() {
    // M₀ = N_S = 500 on 50 cells; with a per-pair binding rate k₁ the free
    // fraction q solves ρq² = 1 − q for ρ = k₁Δx·N_S/k₋₁
    let (cells, per_cell, m0, km1) = (50usize, 10u32, 500u32, 1.0);
    let dx = 1.0 / cells as f64;
    let n_s = f64::from(per_cell) * cells as f64;
    let rho = 6.0;
    let k1 = rho * km1 / (dx * n_s);
    let p = model1(cells, per_cell, m0, k1, km1);
    let mc = simulate_model1(&p, McConfig::new(3.0, 4e-5, 2500, 4, 12).unwrap()).unwrap();
    let m = f64::from(m0);
    // k₁Δx(M₀ − B)(N_S − B) = k₋₁B, smallest root
    let (a, b, c) = (k1 * dx, -(k1 * dx * (m + n_s) + km1), k1 * dx * m * n_s);
    let bound = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
    let est = mc.time_averaged_bound.mean;
    eprintln!(
        "mass action: {est} vs {bound}; free fraction {} vs fraction_bound {}",
        1.0 - est / m,
        fraction_bound(rho)
    );
    assert!((est - bound).abs() < 0.05 * bound);
    // the closed form is the free fraction here, not the bound one
    assert!(((1.0 - est / m) - fraction_bound(rho)).abs() < 0.05 * fraction_bound(rho));
}

#[test]
fn boundary_binding_matches_pde() {
    let rates = ReactionRates {
        k1: 1.0,
        k_minus1: 30.0,
        ..Default::default()
    };
    let (sites, m0) = (3u32, 30u32);
    let grid = Grid1D::new(1.0, 100).unwrap();
    let pde = solve_boundary_binding(
        &grid,
        1.0,
        &rates,
        sites,
        &InitialDistribution::uniform(&grid, m0),
        TimeStepping::new(4.0, 1e-3, 4000).unwrap(),
    )
    .unwrap();
    let steady = pde.last().unwrap();
    let params = BoundaryMcParams {
        interval: Interval1D::new(1.0, 1.0).unwrap(),
        rates,
        sites,
        particles: m0,
    };
    let mc = simulate_boundary_binding(&params, McConfig::new(4.0, 2e-5, 10000, 64, 13).unwrap())
        .unwrap();
    let est = &mc.time_averaged_open;
    assert_eq!(mc.max_conservation_error, 0.0);
    // the particle count tracks the bound count of the flux balance; the
    // ladder mean sits lower because its birth rate uses the mean-field
    // free count
    assert!(
        est.within(steady.bound, 3.0),
        "{} ± {} vs {}",
        est.mean,
        est.std_error,
        steady.bound
    );
    assert!(steady.mean < steady.bound);
}

fn pushpull(sink: f64, gamma: f64, k1: f64) -> PushPullParams {
    PushPullParams {
        interval: Interval1D::new(1.0, 1.0).unwrap(),
        sink,
        injection: Injection::Uniform,
        gamma,
        k1,
    }
}

#[test]
fn pushpull_without_killing_grows_linearly() {
    let mc = simulate_pushpull(
        &pushpull(0.0, 2.0, 0.0),
        SinkModel::LocalTime,
        McConfig::new(3.0, 5e-3, 600, 2000, 14).unwrap(),
    )
    .unwrap();
    assert_eq!(mc.count.mean[0], 1.0);
    assert!(
        mc.steady.within(7.0, 3.0),
        "{} ± {}",
        mc.steady.mean,
        mc.steady.std_error
    );
}

#[test]
fn pushpull_steady_mean_at_wall_sink() {
    let p = pushpull(0.0, 1.0, 1.0);
    let exact = steady_mean(&p).unwrap().value;
    for (sink, dt) in [
        (SinkModel::LocalTime, 5e-3),
        (SinkModel::Bin { halfwidth: 0.05 }, 1e-4),
    ] {
        let mc = simulate_pushpull(
            &p,
            sink,
            McConfig::new(12.0, dt, 100_000, 2000, 15).unwrap(),
        )
        .unwrap();
        assert!(
            mc.steady.within(exact, 3.0),
            "{sink:?}: {} ± {}",
            mc.steady.mean,
            mc.steady.std_error
        );
    }
}

#[test]
fn pushpull_linear_in_gamma() {
    let config = McConfig::new(12.0, 5e-3, 100_000, 3000, 18).unwrap();
    let one = simulate_pushpull(&pushpull(0.0, 1.0, 1.0), SinkModel::LocalTime, config)
        .unwrap()
        .steady;
    let two = simulate_pushpull(&pushpull(0.0, 2.0, 1.0), SinkModel::LocalTime, config)
        .unwrap()
        .steady;
    let se = (4.0 * one.std_error.powi(2) + two.std_error.powi(2)).sqrt();
    assert!((two.mean - 2.0 * one.mean).abs() <= 3.0 * se);
}

#[test]
fn sink_width_converges() {
    let p = pushpull(0.5, 1.0, 1.0);
    let exact = steady_mean(&p).unwrap().exact;
    let mut means = Vec::new();
    for (h, dt, seed) in [(0.1, 5e-4, 19), (0.05, 1.5e-4, 20)] {
        let mc = simulate_pushpull(
            &p,
            SinkModel::Bin { halfwidth: h },
            McConfig::new(10.0, dt, 100_000, 1500, seed).unwrap(),
        )
        .unwrap()
        .steady;
        assert!(
            mc.within(exact, 3.0),
            "h = {h}: {} ± {} vs {exact}",
            mc.mean,
            mc.std_error
        );
        means.push(mc);
    }
    let se = (means[0].std_error.powi(2) + means[1].std_error.powi(2)).sqrt();
    assert!((means[0].mean - means[1].mean).abs() <= 3.0 * se);
}

#[test]
fn survival_laplace_transform() {
    let p = PushPullParams {
        interval: Interval1D::normalized(),
        sink: std::f64::consts::FRAC_PI_2,
        injection: Injection::At(0.0),
        gamma: 0.0,
        k1: 1.0,
    };
    let tau = 0.5;
    let curve = estimate_survival(&p, &[0.0, 60.0], SinkModel::LocalTime, 2e-3, 4000, 16).unwrap();
    // ∫e^{−τt}1{T > t}dt = (1 − e^{−τT})/τ per replica
    let samples: Vec<f64> = curve
        .lifetimes
        .iter()
        .map(|l| (1.0 - (-tau * l.unwrap_or(60.0)).exp()) / tau)
        .collect();
    let est = microchem::oracle::EnsembleStats::from_samples(samples, 16);
    let exact = survival_laplace(tau, &p, None).unwrap();
    assert!(
        est.within(exact, 2.0),
        "{} ± {} vs {exact}",
        est.mean,
        est.std_error
    );
}

#[test]
fn pushpull_count_is_poisson_at_midpoint_sink() {
    let p = PushPullParams {
        interval: Interval1D::normalized(),
        sink: std::f64::consts::FRAC_PI_2,
        injection: Injection::At(0.0),
        gamma: 5.0,
        k1: 1.0,
    };
    let mc = simulate_pushpull(
        &p,
        SinkModel::LocalTime,
        McConfig::new(30.0, 5e-3, 100_000, 600, 17).unwrap(),
    )
    .unwrap()
    .steady;
    let mean = steady_mean(&p).unwrap();
    assert!(!mean.in_domain);
    assert!(
        mc.within(mean.exact, 3.0),
        "{} ± {} vs {}",
        mc.mean,
        mc.std_error,
        mean.exact
    );
    // Poisson(λ): Var(s²) ≈ (λ + 2λ²)/R
    let lambda = mean.exact;
    let se_var = ((lambda + 2.0 * lambda * lambda) / mc.replicas as f64).sqrt();
    assert!(
        (mc.variance - lambda).abs() <= 3.0 * se_var,
        "{} vs {lambda}",
        mc.variance
    );
    // the single-exponential variance route is far outside that band here
    let approx = steady_variance(&p, AlphaConvention::default()).unwrap();
    assert!(approx.is_finite());
}

#[test]
fn birth_death_occupancy_matches_stationary() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    for case in 0..6 {
        let spec = BirthDeathSpec {
            channels: rng.gen_range(1..=6),
            agonists: rng.gen_range(0..=8),
            tau1: rng.gen_range(0.2..2.0),
            k_minus1: rng.gen_range(0.2..2.0),
        };
        let exact = stationary_dist(&spec).unwrap();
        let mc = gillespie_birth_death(&spec, 300.0, 20.0, 60, 100 + case).unwrap();
        for (i, (p, se)) in mc.occupancy.iter().zip(&mc.occupancy_std_error).enumerate() {
            assert!(
                (p - exact.probabilities[i]).abs() <= 3.5 * se + 1e-12,
                "{spec:?} state {i}: {p} ± {se} vs {}",
                exact.probabilities[i]
            );
        }
        assert!(mc.mean_open.within(exact.mean_open, 3.5) || exact.variance_open == 0.0);
    }
}

#[test]
fn mm_master_matches_gillespie() {
    let spec = MMSpec {
        substrate: 5,
        enzymes: 2,
        k_minus1: 1.0,
        k2: 1.0,
        tau1: 1.0,
    };
    let times = [0.5, 1.0, 2.0, 5.0];
    let master = mm_master(&spec, 5.0, 0.5).unwrap();
    let mc = gillespie_mm(&spec, &times, 4000, 22).unwrap();
    for (j, &t) in times.iter().enumerate() {
        let idx = (t / 0.5).round() as usize;
        let (m, se) = (mc.product.mean[j], mc.product.std_error[j]);
        assert!(
            (m - master.mean_product[idx]).abs() <= 3.0 * se,
            "t = {t}: {m} ± {se} vs {}",
            master.mean_product[idx]
        );
    }
}
