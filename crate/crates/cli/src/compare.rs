//! Side-by-side reports for two or three routes describing the same
//! physical setup, each row with a pre-registered tolerance and verdict.

use microchem::markov::{mm_master, stationary_dist};
use microchem::oracle::{estimate_survival, fit_decay_rate};
use microchem::pde_master::{solve_boundary_binding, TimeStepping};
use microchem::renewal::{
    continuum_profile, decay_rate_alpha, slowest_decay_rate, steady_mean, LaplaceSurvival,
};
use microchem::{Grid1D, InitialDistribution, ReactionRates};

use crate::config::{CompareSection, ExperimentConfig, Model};
use crate::error::CliError;
use crate::models::{
    birth_death, continuum_params, mm_spec, mm_times, pushpull_params, run_model,
    survival_transform, Outcome,
};
use crate::output::{Cell, CsvTable};

pub const COLUMNS: [&str; 10] = [
    "quantity",
    "route_a",
    "value_a",
    "route_b",
    "value_b",
    "std_error",
    "tolerance",
    "deviation",
    "verdict",
    "note",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The analytic value is outside its validity domain and not judged.
    OutOfDomain,
    /// Reported for context only.
    Info,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::OutOfDomain => "OUT_OF_DOMAIN",
            Verdict::Info => "INFO",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub quantity: String,
    pub route_a: String,
    pub value_a: f64,
    pub route_b: String,
    pub value_b: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub note: String,
}

impl Row {
    /// `|b − a| ≤ bands·se`; `deviation` is then reported in standard errors.
    fn band(quantity: &str, a: (&str, f64), b: (&str, f64), se: f64, bands: f64) -> Self {
        let ok = (b.1 - a.1).abs() <= bands * se;
        Self {
            quantity: quantity.into(),
            route_a: a.0.into(),
            value_a: a.1,
            route_b: b.0.into(),
            value_b: b.1,
            std_error: se,
            tolerance: bands * se,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            note: String::new(),
        }
    }

    /// `|b − a| ≤ tol` for deterministic routes.
    fn absolute(quantity: &str, a: (&str, f64), b: (&str, f64), tol: f64) -> Self {
        let ok = (b.1 - a.1).abs() <= tol;
        Self {
            quantity: quantity.into(),
            route_a: a.0.into(),
            value_a: a.1,
            route_b: b.0.into(),
            value_b: b.1,
            std_error: f64::NAN,
            tolerance: tol,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            note: String::new(),
        }
    }

    fn with(mut self, verdict: Verdict, note: &str) -> Self {
        self.verdict = verdict;
        self.note = note.into();
        self
    }

    fn note(mut self, note: &str) -> Self {
        self.note = note.into();
        self
    }

    fn deviation(&self) -> f64 {
        let d = self.value_b - self.value_a;
        if self.std_error.is_finite() && self.std_error > 0.0 {
            d / self.std_error
        } else {
            d
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<Row>,
    pub flags: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&COLUMNS);
        for r in &self.rows {
            t.push(vec![
                r.quantity.as_str().into(),
                r.route_a.as_str().into(),
                Cell::Num(r.value_a),
                r.route_b.as_str().into(),
                Cell::Num(r.value_b),
                Cell::Num(r.std_error),
                Cell::Num(r.tolerance),
                Cell::Num(r.deviation()),
                r.verdict.label().into(),
                r.note.as_str().into(),
            ]);
        }
        t
    }

    pub fn row(&self, quantity: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }
}

fn summary(o: &Outcome, name: &str) -> f64 {
    o.get(name).unwrap_or(f64::NAN)
}

pub fn compare(config: &ExperimentConfig) -> Result<Report, CliError> {
    let section = config
        .compare
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [compare] section".into()))?;
    let mut routes = section.routes.clone();
    routes.sort();
    routes.dedup();
    use Model::*;
    match routes.as_slice() {
        [PushpullRenewal, McPushpull] => pushpull(config, section, false),
        [PushpullRenewal, PushpullContinuum, McPushpull] => pushpull(config, section, true),
        [PushpullRenewal, PushpullContinuum] => discrete_vs_continuum(config),
        [PushpullRenewal, McSurvival] => survival(config, section),
        [Markov, McMarkov] => markov(config, section),
        [Mm, McMm] => mm(config, section),
        [BoundaryBinding, McBoundaryBinding] => boundary(config, section),
        [Markov, PushpullChain] => chain_mixing(config, section),
        _ => Err(CliError::Usage(format!(
            "incomparable routes: {}",
            routes
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

fn pushpull(
    config: &ExperimentConfig,
    s: &CompareSection,
    continuum: bool,
) -> Result<Report, CliError> {
    let params = pushpull_params(config.pushpull()?)?;
    let closed = steady_mean(&params)?;
    let mc = run_model(config, Model::McPushpull)?;
    let (m, se) = (
        summary(&mc, "steady_mean"),
        summary(&mc, "steady_std_error"),
    );
    let oracle = ("mc_pushpull", m);
    let mut report = Report::default();
    let formula = Row::band(
        "steady_mean_formula",
        ("pushpull_renewal", closed.value),
        oracle,
        se,
        s.bands,
    );
    report.rows.push(if closed.in_domain {
        formula
    } else {
        report
            .flags
            .push("steady_mean_formula_out_of_domain".into());
        formula.with(
            Verdict::OutOfDomain,
            "closed form used outside its validity domain; the oracle value is the reference",
        )
    });
    report.rows.push(
        Row::band(
            "steady_mean_exact",
            ("pushpull_renewal", closed.exact),
            oracle,
            se,
            s.bands,
        )
        .note("gamma times the exact mean lifetime"),
    );
    if continuum {
        discrepancy_rows(&mut report, &params, closed.value)?;
        let n0 = continuum_profile(&continuum_params(&params), 2)?.total;
        let row = Row::band(
            "continuum_total",
            ("pushpull_continuum", n0),
            oracle,
            se,
            s.bands,
        );
        report.rows.push(match params.injection {
            microchem::renewal::Injection::Uniform => row.note("uniform production gamma/L"),
            microchem::renewal::Injection::At(_) => row.with(
                Verdict::Info,
                "continuum assumes uniform production; injection point differs",
            ),
        });
    }
    Ok(report)
}

/// Records `N₀ − N(∞)` against the predicted `γx₁²/(2D)`.
fn discrepancy_rows(
    report: &mut Report,
    params: &microchem::renewal::PushPullParams,
    discrete: f64,
) -> Result<(), CliError> {
    let n0 = continuum_profile(&continuum_params(params), 2)?.total;
    let predicted = params.gamma * params.sink * params.sink / (2.0 * params.interval.diffusion);
    let tol = 1e-12 * n0.abs().max(discrete.abs()).max(1.0);
    report.rows.push(Row::absolute(
        "continuum_minus_discrete",
        ("pushpull_continuum - pushpull_renewal", n0 - discrete),
        ("predicted gamma*x1^2/(2D)", predicted),
        tol,
    ));
    if params.sink > 0.0 {
        report.flags.push("continuum_discrete_discrepancy".into());
    }
    Ok(())
}

fn discrete_vs_continuum(config: &ExperimentConfig) -> Result<Report, CliError> {
    let params = pushpull_params(config.pushpull()?)?;
    let closed = steady_mean(&params)?;
    let n0 = continuum_profile(&continuum_params(&params), 2)?.total;
    let mut report = Report::default();
    let tol = 1e-12 * n0.abs().max(1.0);
    let row = Row::absolute(
        "steady_mean",
        ("pushpull_renewal", closed.value),
        ("pushpull_continuum", n0),
        tol,
    );
    report.rows.push(if params.sink > 0.0 {
        row.with(
            Verdict::Info,
            "routes differ by gamma*x1^2/(2D) away from the wall",
        )
    } else {
        row
    });
    discrepancy_rows(&mut report, &params, closed.value)?;
    if !closed.in_domain {
        report
            .flags
            .push("steady_mean_formula_out_of_domain".into());
    }
    Ok(report)
}

fn survival(config: &ExperimentConfig, s: &CompareSection) -> Result<Report, CliError> {
    let pp = config.pushpull()?;
    let params = pushpull_params(pp)?;
    let mc = config.mc();
    let dt = mc
        .dt
        .ok_or_else(|| CliError::Config("mc_survival needs mc.dt".into()))?;
    let t_end = mc.t_end.unwrap_or(pp.t_end);
    let samples = mc.samples.max(2);
    let grid: Vec<f64> = (0..samples)
        .map(|i| t_end * i as f64 / (samples - 1) as f64)
        .collect();
    let curve = estimate_survival(&params, &grid, mc.sink, dt, mc.replicas, config.seed)?;
    let (m, se) = survival_transform(&curve.lifetimes, t_end, s.tau);
    let analytic = LaplaceSurvival::new(params)?.survival(s.tau)?;
    let mut report = Report::default();
    report.rows.push(
        Row::band(
            "survival_laplace",
            ("pushpull_renewal", analytic),
            ("mc_survival", m),
            se,
            s.bands,
        )
        .note(&format!("tau = {}", s.tau)),
    );
    if params.k1 > 0.0 {
        let fitted = fit_decay_rate(&curve).unwrap_or(f64::NAN);
        let alpha = decay_rate_alpha(&params, pp.alpha_convention)?;
        let slowest = slowest_decay_rate(&params)?;
        report.rows.push(
            Row::absolute(
                "decay_rate_expansion",
                ("pushpull_renewal", alpha),
                ("mc_survival", fitted),
                f64::NAN,
            )
            .with(
                Verdict::Info,
                "expansion value against the fitted log-survival slope",
            ),
        );
        report.rows.push(
            Row::absolute(
                "decay_rate_eigenvalue",
                ("slowest_decay_rate", slowest),
                ("mc_survival", fitted),
                f64::NAN,
            )
            .with(
                Verdict::Info,
                "lowest Robin eigenvalue against the fitted slope",
            ),
        );
    }
    Ok(report)
}

fn markov(config: &ExperimentConfig, s: &CompareSection) -> Result<Report, CliError> {
    let spec = birth_death(config.markov()?);
    let exact = stationary_dist(&spec)?;
    let mc_out = run_model(config, Model::McMarkov)?;
    let mut report = Report::default();
    let occ = mc_out.table.column("occupancy").unwrap_or_default();
    let err = mc_out.table.column("std_error").unwrap_or_default();
    let kf = mc_out.table.column("k_free").unwrap_or_default();
    for ((k, p), e) in kf.iter().zip(&occ).zip(&err) {
        let k = k.as_f64().unwrap_or(f64::NAN) as u32;
        report.rows.push(Row::band(
            &format!("occupancy_k{k}"),
            ("markov", exact.prob_free(k)),
            ("mc_markov", p.as_f64().unwrap_or(f64::NAN)),
            e.as_f64().unwrap_or(f64::NAN),
            s.bands,
        ));
    }
    report.rows.push(Row::band(
        "mean_open",
        ("markov", exact.mean_open),
        ("mc_markov", summary(&mc_out, "mean_open")),
        summary(&mc_out, "mean_open_std_error"),
        s.bands,
    ));
    Ok(report)
}

fn mm(config: &ExperimentConfig, s: &CompareSection) -> Result<Report, CliError> {
    let m = config.mm()?;
    let traj = mm_master(&mm_spec(m), m.t_end, m.dt)?;
    let mc_out = run_model(config, Model::McMm)?;
    let mut report = Report::default();
    let times = mm_times(m);
    let product = mc_out.table.column("product").unwrap_or_default();
    let product_se = mc_out.table.column("product_std_error").unwrap_or_default();
    for (j, &t) in times.iter().enumerate() {
        let i = (t / m.dt).round() as usize;
        if i >= traj.t.len() || (traj.t[i] - t).abs() > 1e-9 * t.max(1.0) {
            return Err(CliError::Config(format!(
                "sample time {t} is not on the master-equation grid (dt = {}, t_end = {})",
                m.dt, m.t_end
            )));
        }
        report.rows.push(Row::band(
            &format!("mean_product_t{t}"),
            ("mm", traj.mean_product[i]),
            ("mc_mm", product[j].as_f64().unwrap_or(f64::NAN)),
            product_se[j].as_f64().unwrap_or(f64::NAN),
            s.bands,
        ));
    }
    Ok(report)
}

fn boundary(config: &ExperimentConfig, s: &CompareSection) -> Result<Report, CliError> {
    let b = config.boundary()?;
    let grid = Grid1D::new(b.length, b.cells)?;
    let initial = InitialDistribution::uniform(&grid, b.particles);
    let rates = ReactionRates {
        k1: b.k1,
        k_minus1: b.k_minus1,
        ..Default::default()
    };
    let states = solve_boundary_binding(
        &grid,
        b.diffusion,
        &rates,
        b.sites,
        &initial,
        TimeStepping::new(b.t_end, b.dt, b.record_every)?,
    )?;
    let last = states.last().expect("solver records the initial state");
    let mc_out = run_model(config, Model::McBoundaryBinding)?;
    let (m, se) = (
        summary(&mc_out, "time_averaged_open"),
        summary(&mc_out, "time_averaged_open_std_error"),
    );
    let mut report = Report::default();
    report.rows.push(
        Row::band(
            "bound_count",
            ("boundary_binding", last.bound),
            ("mc_boundary_binding", m),
            se,
            s.bands,
        )
        .note("flux-balance bound count against the oracle time average over the second half"),
    );
    report.rows.push(
        Row::band(
            "ladder_mean",
            ("boundary_binding", last.mean),
            ("mc_boundary_binding", m),
            se,
            s.bands,
        )
        .with(Verdict::Info, "ladder driven by the mean-field free count"),
    );
    Ok(report)
}

fn chain_mixing(config: &ExperimentConfig, s: &CompareSection) -> Result<Report, CliError> {
    let out = run_model(config, Model::PushpullChain)?;
    let mix = summary(&out, "mixing_mean_open");
    let mut report = Report::default();
    report.rows.push(
        Row::absolute(
            "mean_open",
            ("markov", mix),
            ("pushpull_chain", summary(&out, "mean_open")),
            s.rel_tol * mix.abs(),
        )
        .note("Poisson mixture of stationary laws against the coupled chain"),
    );
    Ok(report)
}
