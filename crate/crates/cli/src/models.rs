//! One function per model route. Each returns its curve table plus the
//! scalar summary used by sweeps and comparisons.

use std::collections::BTreeMap;

use microchem::markov::{
    binding_rate, mm_master, poisson_law, pushpull_chain, slow_pushpull_mixing, stationary_dist,
    BirthDeathSpec, MMSpec, PushPullChainSpec,
};
use microchem::oracle::{
    estimate_survival, fit_decay_rate, gillespie_birth_death, gillespie_mm,
    simulate_boundary_binding, simulate_model1, simulate_pushpull, BoundaryMcParams, McConfig,
};
use microchem::pde_master::{
    binding_ratio, fraction_bound, moments_bound, solve_boundary_binding, solve_ladder,
    solve_two_state, steady_cm_on_grid, variance_bound, MasterProblem, TimeStepping,
};
use microchem::renewal::{
    continuum_profile, decay_rate_alpha, slowest_decay_rate, steady_mean, steady_variance,
    survival_curve, Injection, LaplaceSurvival, PushPullParams, RenewalSolver,
};
use microchem::{
    BoundaryCondition, Grid1D, InitialDistribution, Interval1D, ReactionRates, SiteDensity,
};

use crate::config::{
    ChainSection, ExperimentConfig, MarkovSection, MasterSection, McSection, MmSection, Model,
    PushPullSection,
};
use crate::error::CliError;
use crate::output::CsvTable;

/// Mass drift allowed for the conservative grid solvers.
pub const CONSERVATION_TOL: f64 = 1e-8;
/// Detailed-balance and enzyme-conservation tolerance for the chains.
pub const CHAIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub table: CsvTable,
    /// Scalar results in a fixed order; `NaN` where not applicable.
    pub summary: Vec<(String, f64)>,
    pub diagnostics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
    pub failures: Vec<String>,
}

impl Outcome {
    fn new(columns: &[&str]) -> Self {
        Self {
            table: CsvTable::new(columns),
            ..Default::default()
        }
    }

    fn sum(&mut self, name: &str, value: f64) {
        self.summary.push((name.to_string(), value));
    }

    fn diag(&mut self, name: &str, value: f64) {
        self.diagnostics.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

pub fn master_problem(m: &MasterSection) -> Result<MasterProblem, CliError> {
    let grid = Grid1D::new(m.length, m.cells)?;
    let range = |r: Option<[usize; 2]>, what: &str| -> Result<std::ops::Range<usize>, CliError> {
        let [a, b] = r.unwrap_or([0, m.cells]);
        if a >= b || b > m.cells {
            return Err(CliError::Config(format!(
                "{what} [{a}, {b}) is not a nonempty range of cells"
            )));
        }
        Ok(a..b)
    };
    let sites = SiteDensity::on_cells(&grid, m.sites_per_cell, range(m.site_cells, "site_cells")?);
    let initial = match m.initial_cells {
        None => InitialDistribution::uniform(&grid, m.particles),
        Some(r) => {
            InitialDistribution::on_cells(&grid, range(Some(r), "initial_cells")?, m.particles)?
        }
    };
    Ok(MasterProblem {
        grid,
        diffusion: m.diffusion,
        rates: ReactionRates {
            k1: m.k1,
            k_minus1: m.k_minus1,
            ..Default::default()
        },
        sites,
        initial,
        boundary: BoundaryCondition::REFLECTING,
    })
}

pub fn pushpull_params(p: &PushPullSection) -> Result<PushPullParams, CliError> {
    Ok(PushPullParams {
        interval: Interval1D::new(p.length, p.diffusion)?,
        sink: p.sink,
        injection: p.injection_at.map_or(Injection::Uniform, Injection::At),
        gamma: p.gamma,
        k1: p.k1,
    })
}

pub fn birth_death(m: &MarkovSection) -> BirthDeathSpec {
    BirthDeathSpec {
        channels: m.channels,
        agonists: m.agonists,
        tau1: m.tau1,
        k_minus1: m.k_minus1,
    }
}

pub fn mm_spec(m: &MmSection) -> MMSpec {
    MMSpec {
        substrate: m.substrate,
        enzymes: m.enzymes,
        k_minus1: m.k_minus1,
        k2: m.k2,
        tau1: m.tau1,
    }
}

pub fn chain_spec(c: &ChainSection) -> PushPullChainSpec {
    PushPullChainSpec {
        channels: c.channels,
        k_minus1: c.k_minus1,
        tau1: c.tau1,
        gamma: c.gamma,
        degradation_rate: c.degradation_rate,
        q_max: c.q_max,
        reading: c.reading,
        degradation: c.degradation,
    }
}

/// Times at which the Gillespie MM route samples.
pub fn mm_times(m: &MmSection) -> Vec<f64> {
    if m.sample_times.is_empty() {
        vec![m.t_end]
    } else {
        m.sample_times.clone()
    }
}

fn mc_config(
    mc: &McSection,
    model_t_end: f64,
    seed: u64,
    model: Model,
) -> Result<McConfig, CliError> {
    let dt = mc
        .dt
        .ok_or_else(|| CliError::Config(format!("{} needs mc.dt", model.name())))?;
    Ok(McConfig::new(
        mc.t_end.unwrap_or(model_t_end),
        dt,
        mc.record_every,
        mc.replicas,
        seed,
    )?)
}

pub fn run_model(config: &ExperimentConfig, model: Model) -> Result<Outcome, CliError> {
    match model {
        Model::TwoState => run_master(config, false),
        Model::Ladder => run_master(config, true),
        Model::BoundaryBinding => run_boundary(config),
        Model::PushpullRenewal => run_renewal(config),
        Model::PushpullContinuum => run_continuum(config),
        Model::Markov => run_markov(config),
        Model::Mm => run_mm(config),
        Model::PushpullChain => run_chain(config),
        Model::McTwoState => run_mc_two_state(config),
        Model::McBoundaryBinding => run_mc_boundary(config),
        Model::McPushpull => run_mc_pushpull(config),
        Model::McSurvival => run_mc_survival(config),
        Model::McMarkov => run_mc_markov(config),
        Model::McMm => run_mc_mm(config),
    }
}

fn run_master(config: &ExperimentConfig, ladder: bool) -> Result<Outcome, CliError> {
    let m = config.master()?;
    let problem = master_problem(m)?;
    let stepping = TimeStepping::new(m.t_end, m.dt, m.record_every)?;
    let fields = if ladder {
        solve_ladder(&problem, stepping)?
    } else {
        solve_two_state(&problem, stepping)?
    };
    let mut out = Outcome::new(&["t", "mean", "var", "fraction_bound", "mass"]);
    let mut drift = 0.0f64;
    let mut floor = f64::INFINITY;
    for f in &fields {
        let mo = moments_bound(f, &problem.sites)?;
        let mass = f.total_mass();
        drift = drift.max((mass - 1.0).abs());
        floor = floor.min(f.min_value());
        out.table
            .push_nums(&[f.t, mo.mean, mo.variance, mo.fraction_bound, mass]);
    }
    out.diag("mass_drift", drift);
    out.diag("min_density", floor);
    if drift > CONSERVATION_TOL {
        out.failures
            .push(format!("mass drift {drift:e} exceeds {CONSERVATION_TOL:e}"));
    }
    let last = fields.last().expect("solver records the initial state");
    let final_moments = moments_bound(last, &problem.sites)?;
    let rho = binding_ratio(
        f64::from(m.particles),
        m.k1,
        problem.grid.dx,
        problem.sites.total() as f64,
        m.k_minus1,
    );
    if !ladder {
        let cm = steady_cm_on_grid(&problem.grid, &problem.rates, &problem.sites, m.particles)?;
        let m0 = f64::from(m.particles);
        let err = cm
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0.0)
            .map(|(i, &c)| (m0 * last.value(i, 1) - c).abs() / c)
            .fold(0.0, f64::max);
        out.diag("steady_cm_max_rel_error", err);
    }
    out.sum("mean", final_moments.mean);
    out.sum("var", final_moments.variance);
    out.sum("fraction_bound", final_moments.fraction_bound);
    out.sum("rho", rho);
    out.sum("p_m_closed_form", fraction_bound(rho));
    out.sum("variance_closed_form", variance_bound(rho));
    Ok(out)
}

fn run_boundary(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let b = config.boundary()?;
    let grid = Grid1D::new(b.length, b.cells)?;
    let initial = InitialDistribution::uniform(&grid, b.particles);
    let rates = ReactionRates {
        k1: b.k1,
        k_minus1: b.k_minus1,
        ..Default::default()
    };
    let stepping = TimeStepping::new(b.t_end, b.dt, b.record_every)?;
    let states = solve_boundary_binding(&grid, b.diffusion, &rates, b.sites, &initial, stepping)?;
    let mut out = Outcome::new(&["t", "mean", "var", "bound", "total"]);
    let m0 = f64::from(b.particles);
    let mut drift = 0.0f64;
    for s in &states {
        let total = s.total(grid.dx);
        drift = drift.max((total - m0).abs());
        out.table
            .push_nums(&[s.t, s.mean, s.variance, s.bound, total]);
    }
    out.diag("particle_drift", drift);
    if drift > CONSERVATION_TOL * m0.max(1.0) {
        out.failures
            .push(format!("particle count drifted by {drift:e}"));
    }
    let last = states.last().expect("solver records the initial state");
    out.sum("mean", last.mean);
    out.sum("var", last.variance);
    out.sum("bound", last.bound);
    Ok(out)
}

fn run_renewal(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pp = config.pushpull()?;
    let params = pushpull_params(pp)?;
    // the survival curve needs a finer step than the renewal grid
    let sub = (pp.dt / 1e-3).ceil().max(1.0);
    let table = survival_curve(&params, pp.t_end, pp.dt / sub, pp.cells)?;
    let counts = RenewalSolver::new(params.gamma, pp.t_end, pp.dt)?.solve(&|t| table.at(t))?;
    let mut out = Outcome::new(&["t", "survival", "mean", "second_moment", "var"]);
    let var = counts.variance();
    for (i, &t) in counts.t.iter().enumerate() {
        out.table.push_nums(&[
            t,
            table.at(t),
            counts.mean[i],
            counts.second_moment[i],
            var[i],
        ]);
    }
    out.diag("renewal_error_estimate", counts.error_estimate);
    let n = counts.t.len() - 1;
    out.sum("mean_t_end", counts.mean[n]);
    out.sum("var_t_end", var[n]);
    let nan = f64::NAN;
    let (mut sm, mut in_domain, mut exact, mut sv, mut alpha, mut slowest) =
        (nan, nan, nan, nan, nan, nan);
    if params.k1 > 0.0 {
        let s = steady_mean(&params)?;
        sm = s.value;
        exact = s.exact;
        in_domain = if s.in_domain { 1.0 } else { 0.0 };
        if !s.in_domain {
            out.flags.push("steady_mean_formula_out_of_domain".into());
        }
        alpha = decay_rate_alpha(&params, pp.alpha_convention)?;
        slowest = slowest_decay_rate(&params)?;
        sv = steady_variance(&params, pp.alpha_convention)?;
        if sv < 0.0 {
            out.flags.push("steady_variance_negative".into());
        }
        let lifetime = LaplaceSurvival::new(params)?.mean_lifetime()?;
        let dt = table.dt;
        let integral = dt
            * (table.values.iter().sum::<f64>()
                - 0.5 * (1.0 + table.values[table.values.len() - 1]));
        out.diag(
            "survival_tail_at_t_end",
            table.values[table.values.len() - 1],
        );
        out.diag(
            "lifetime_integral_rel_gap",
            (integral - lifetime) / lifetime,
        );
    } else {
        out.flags.push("no_killing".into());
    }
    out.sum("steady_mean", sm);
    out.sum("steady_mean_in_domain", in_domain);
    out.sum("steady_mean_exact", exact);
    out.sum("steady_variance", sv);
    out.sum("alpha", alpha);
    out.sum("slowest_decay_rate", slowest);
    Ok(out)
}

/// Continuum profile with `γ/L` per unit length, so that the total
/// production matches the discrete injection rate.
pub fn continuum_params(params: &PushPullParams) -> PushPullParams {
    PushPullParams {
        gamma: params.gamma / params.interval.length,
        ..*params
    }
}

fn run_continuum(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pp = config.pushpull()?;
    let params = pushpull_params(pp)?;
    let profile = continuum_profile(&continuum_params(&params), pp.points)?;
    let mut out = Outcome::new(&["x", "c"]);
    for (x, c) in profile.x.iter().zip(&profile.c) {
        out.table.push_nums(&[*x, *c]);
    }
    let h = profile.x[1] - profile.x[0];
    let trapezoid =
        h * (profile.c.iter().sum::<f64>() - 0.5 * (profile.c[0] + profile.c[profile.c.len() - 1]));
    out.diag("profile_quadrature_gap", trapezoid - profile.total);
    let discrete = steady_mean(&params)?;
    let d = params.interval.diffusion;
    out.sum("n0", profile.total);
    out.sum("discrete_mean", discrete.value);
    out.sum("exact_mean", discrete.exact);
    out.sum("discrepancy", profile.total - discrete.value);
    out.sum(
        "predicted_discrepancy",
        params.gamma * params.sink * params.sink / (2.0 * d),
    );
    if params.sink > 0.0 {
        out.flags.push("continuum_discrete_discrepancy".into());
    }
    if !discrete.in_domain {
        out.flags.push("steady_mean_formula_out_of_domain".into());
    }
    Ok(out)
}

fn run_markov(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = birth_death(config.markov()?);
    let st = stationary_dist(&spec)?;
    let mut out = Outcome::new(&["k_free", "open", "probability"]);
    for (i, p) in st.probabilities.iter().enumerate() {
        let k = st.k_min + i as u32;
        out.table
            .push_nums(&[f64::from(k), f64::from(spec.channels - k), *p]);
    }
    // λ_k P_k = k₋₁(S − k + 1) P_{k−1}
    let mut residual = 0.0f64;
    for k in st.k_min + 1..=spec.channels {
        let down = binding_rate(k, &spec)? * st.prob_free(k);
        let up = spec.k_minus1 * f64::from(spec.channels - k + 1) * st.prob_free(k - 1);
        let scale = down.abs().max(up.abs());
        if scale > 0.0 {
            residual = residual.max((down - up).abs() / scale);
        }
    }
    out.diag("detailed_balance_residual", residual);
    if residual > CHAIN_TOL {
        out.failures
            .push(format!("detailed balance residual {residual:e}"));
    }
    out.sum("mean_open", st.mean_open);
    out.sum("var", st.variance_open);
    out.sum("second_moment_open", st.second_moment_open);
    Ok(out)
}

fn run_mm(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = config.mm()?;
    let spec = mm_spec(m);
    let traj = mm_master(&spec, m.t_end, m.dt)?;
    let mut out = Outcome::new(&["t", "mean_product", "mean_bound", "mean_free_enzyme"]);
    let e0 = f64::from(spec.enzymes);
    let mut conservation = 0.0f64;
    let mut monotone = true;
    for i in 0..traj.t.len() {
        conservation = conservation.max((traj.mean_bound[i] + traj.mean_free_enzyme[i] - e0).abs());
        if i > 0 && traj.mean_product[i] < traj.mean_product[i - 1] - CHAIN_TOL {
            monotone = false;
        }
        out.table.push_nums(&[
            traj.t[i],
            traj.mean_product[i],
            traj.mean_bound[i],
            traj.mean_free_enzyme[i],
        ]);
    }
    out.diag("enzyme_conservation", conservation);
    if conservation > CHAIN_TOL {
        out.failures
            .push(format!("enzyme conservation off by {conservation:e}"));
    }
    if !monotone {
        out.failures.push("mean product decreased".into());
    }
    let n = traj.t.len() - 1;
    out.sum("mean_product", traj.mean_product[n]);
    out.sum("mean_bound", traj.mean_bound[n]);
    Ok(out)
}

fn run_chain(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let c = config.chain()?;
    let spec = chain_spec(c);
    let run = pushpull_chain(&spec, c.t_end, c.dt)?;
    let mut out = Outcome::new(&["t", "mean_open", "mean_agonists"]);
    for i in 0..run.t.len() {
        out.table
            .push_nums(&[run.t[i], run.mean_open[i], run.mean_agonists[i]]);
    }
    out.diag("cap_mass", run.cap_mass);
    let (mean, var) = run.final_open_moments(spec.channels);
    out.sum("mean_open", mean);
    out.sum("var", var);
    out.sum("mean_agonists", *run.mean_agonists.last().unwrap_or(&0.0));
    let (mut mix_mean, mut mix_var) = (f64::NAN, f64::NAN);
    if spec.degradation_rate > 0.0 {
        let law = poisson_law(spec.gamma / spec.degradation_rate, spec.cap());
        let mix = slow_pushpull_mixing(spec.channels, spec.tau1, spec.k_minus1, &law)?;
        mix_mean = mix.mean;
        mix_var = mix.variance;
    }
    out.sum("mixing_mean_open", mix_mean);
    out.sum("mixing_var", mix_var);
    Ok(out)
}

fn run_mc_two_state(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = config.master()?;
    let problem = master_problem(m)?;
    let mc = mc_config(&config.mc(), m.t_end, config.seed, Model::McTwoState)?;
    let r = simulate_model1(&problem, mc)?;
    let mut out = Outcome::new(&["t", "bound", "bound_std_error", "free", "free_std_error"]);
    for i in 0..r.bound.t.len() {
        out.table.push_nums(&[
            r.bound.t[i],
            r.bound.mean[i],
            r.bound.std_error[i],
            r.free.mean[i],
            r.free.std_error[i],
        ]);
    }
    out.sum("time_averaged_bound", r.time_averaged_bound.mean);
    out.sum(
        "time_averaged_bound_std_error",
        r.time_averaged_bound.std_error,
    );
    Ok(out)
}

fn run_mc_boundary(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let b = config.boundary()?;
    let params = BoundaryMcParams {
        interval: Interval1D::new(b.length, b.diffusion)?,
        rates: ReactionRates {
            k1: b.k1,
            k_minus1: b.k_minus1,
            ..Default::default()
        },
        sites: b.sites,
        particles: b.particles,
    };
    let mc = mc_config(&config.mc(), b.t_end, config.seed, Model::McBoundaryBinding)?;
    let r = simulate_boundary_binding(&params, mc)?;
    let mut out = Outcome::new(&["t", "open", "open_std_error", "interior"]);
    for i in 0..r.open.t.len() {
        out.table.push_nums(&[
            r.open.t[i],
            r.open.mean[i],
            r.open.std_error[i],
            r.interior.mean[i],
        ]);
    }
    out.diag("max_conservation_error", r.max_conservation_error);
    if r.max_conservation_error > 0.0 {
        out.failures.push("particle count not conserved".into());
    }
    out.sum("time_averaged_open", r.time_averaged_open.mean);
    out.sum(
        "time_averaged_open_std_error",
        r.time_averaged_open.std_error,
    );
    Ok(out)
}

fn run_mc_pushpull(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pp = config.pushpull()?;
    let params = pushpull_params(pp)?;
    let mc_section = config.mc();
    let mc = mc_config(&mc_section, pp.t_end, config.seed, Model::McPushpull)?;
    let r = simulate_pushpull(&params, mc_section.sink, mc)?;
    let mut out = Outcome::new(&["t", "mean", "var", "std_error"]);
    for i in 0..r.count.t.len() {
        out.table.push_nums(&[
            r.count.t[i],
            r.count.mean[i],
            r.count.variance[i],
            r.count.std_error[i],
        ]);
    }
    out.sum("steady_mean", r.steady.mean);
    out.sum("steady_std_error", r.steady.std_error);
    out.sum("steady_var", r.steady.variance);
    Ok(out)
}

/// Per-replica `∫₀^T e^{−τt} dt` with `T` the lifetime, censored at the
/// horizon. Returns `(mean, std_error)`.
pub fn survival_transform(lifetimes: &[Option<f64>], t_end: f64, tau: f64) -> (f64, f64) {
    let samples: Vec<f64> = lifetimes
        .iter()
        .map(|l| -(-tau * l.unwrap_or(t_end)).exp_m1() / tau)
        .collect();
    let stats = microchem::oracle::EnsembleStats::from_samples(samples, 0);
    (stats.mean, stats.std_error)
}

fn run_mc_survival(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let pp = config.pushpull()?;
    let params = pushpull_params(pp)?;
    let mc = config.mc();
    let dt = mc
        .dt
        .ok_or_else(|| CliError::Config("mc_survival needs mc.dt".into()))?;
    let t_end = mc.t_end.unwrap_or(pp.t_end);
    if mc.samples < 2 {
        return Err(CliError::Config("mc.samples must be at least 2".into()));
    }
    let grid: Vec<f64> = (0..mc.samples)
        .map(|i| t_end * i as f64 / (mc.samples - 1) as f64)
        .collect();
    let curve = estimate_survival(&params, &grid, mc.sink, dt, mc.replicas, config.seed)?;
    let mut out = Outcome::new(&["t", "survival", "std_error", "survivors"]);
    for i in 0..curve.t.len() {
        out.table.push_nums(&[
            curve.t[i],
            curve.survival[i],
            curve.std_error[i],
            curve.survivors[i] as f64,
        ]);
    }
    let rate = match fit_decay_rate(&curve) {
        Ok(r) => r,
        Err(e) => {
            out.flags.push(format!("decay_fit_failed: {e}"));
            f64::NAN
        }
    };
    let censored =
        curve.lifetimes.iter().filter(|l| l.is_none()).count() as f64 / curve.replicas as f64;
    out.diag("censored_fraction", censored);
    out.sum("decay_rate", rate);
    out.sum("censored_fraction", censored);
    Ok(out)
}

fn run_mc_markov(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = birth_death(config.markov()?);
    let mc = config.mc();
    let t_end = mc
        .t_end
        .ok_or_else(|| CliError::Config("mc_markov needs mc.t_end".into()))?;
    let r = gillespie_birth_death(&spec, t_end, mc.burn_in, mc.replicas, config.seed)?;
    let mut out = Outcome::new(&["k_free", "open", "occupancy", "std_error"]);
    for (i, p) in r.occupancy.iter().enumerate() {
        let k = r.k_min + i as u32;
        out.table.push_nums(&[
            f64::from(k),
            f64::from(spec.channels - k),
            *p,
            r.occupancy_std_error[i],
        ]);
    }
    out.diag("events", r.events as f64);
    out.sum("mean_open", r.mean_open.mean);
    out.sum("mean_open_std_error", r.mean_open.std_error);
    out.sum("var", r.variance_open);
    Ok(out)
}

fn run_mc_mm(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let m = config.mm()?;
    let spec = mm_spec(m);
    let mc = config.mc();
    let r = gillespie_mm(&spec, &mm_times(m), mc.replicas, config.seed)?;
    let mut out = Outcome::new(&[
        "t",
        "product",
        "product_std_error",
        "bound",
        "bound_std_error",
    ]);
    for i in 0..r.product.t.len() {
        out.table.push_nums(&[
            r.product.t[i],
            r.product.mean[i],
            r.product.std_error[i],
            r.bound.mean[i],
            r.bound.std_error[i],
        ]);
    }
    let n = r.product.t.len() - 1;
    out.sum("mean_product", r.product.mean[n]);
    out.sum("mean_product_std_error", r.product.std_error[n]);
    Ok(out)
}
