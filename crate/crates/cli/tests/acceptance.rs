//! Acceptance suite. Prints one PASS/FAIL line per criterion with its
//! runtime and exits non-zero if any gated criterion fails. Criterion 7 is
//! a known failure: its line is printed but it does not gate the run.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use microchem::markov::{mm_master, stationary_dist, BirthDeathSpec, MMSpec};
use microchem::oracle::{
    estimate_survival, fit_decay_rate, gillespie_birth_death, gillespie_mm, simulate_pushpull,
    McConfig, SinkModel,
};
use microchem::pde_master::{
    fraction_bound, solve_two_state, steady_cm_on_grid, variance_bound, MasterProblem, TimeStepping,
};
use microchem::renewal::{
    alpha_normalized, continuum_profile, mean_transient, slowest_decay_rate, steady_mean,
    steady_variance_with, Injection, PushPullParams,
};
use microchem::{
    BoundaryCondition, Grid1D, InitialDistribution, Interval1D, ReactionRates, SiteDensity,
};
use microchem_cli::figures::{figure_data, Figure, MARKOV_CHANNELS, MARKOV_K_MINUS1, MARKOV_TAU1};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

type Verdict = Result<String, String>;

fn pass_if(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    known_failure: bool,
    check: fn() -> Verdict,
}

fn closed_forms() -> Verdict {
    let cases = [
        (fraction_bound(2.0), 0.5),
        (fraction_bound(6.0), 1.0 / 3.0),
        (variance_bound(2.0), 0.25),
    ];
    let worst = cases.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // p_M = 1/2 at rho = 2 and the variance falls off on both sides
    let peak =
        variance_bound(2.0) > variance_bound(1.999) && variance_bound(2.0) > variance_bound(2.001);
    pass_if(
        worst <= 1e-12 && peak,
        format!(
            "max error {worst:.1e}, peak at p_M = {}",
            fraction_bound(2.0)
        ),
    )
}

fn two_state_steady() -> Verdict {
    let grid = Grid1D::new(1.0, 256).unwrap();
    let particles = 20;
    let problem = MasterProblem {
        sites: SiteDensity::uniform(&grid, 1),
        initial: InitialDistribution::uniform(&grid, particles),
        grid,
        diffusion: 1.0,
        rates: ReactionRates {
            k1: 0.5,
            k_minus1: 2.0,
            ..Default::default()
        },
        boundary: BoundaryCondition::REFLECTING,
    };
    let stepping = TimeStepping::new(20.0, 2e-4, 10_000).unwrap();
    let steps = stepping.steps();
    let fields = solve_two_state(&problem, stepping).map_err(|e| e.to_string())?;
    let drift = fields
        .iter()
        .map(|f| (f.total_mass() - 1.0).abs())
        .fold(0.0, f64::max);
    let cm = steady_cm_on_grid(&problem.grid, &problem.rates, &problem.sites, particles).unwrap();
    let last = fields.last().unwrap();
    let m0 = f64::from(particles);
    let err = cm
        .iter()
        .enumerate()
        .map(|(i, &c)| (m0 * last.value(i, 1) - c).abs() / c)
        .fold(0.0, f64::max);
    pass_if(
        err <= 1e-5 && drift < 1e-8 && steps >= 100_000,
        format!("max rel error {err:.2e}, drift {drift:.2e} over {steps} steps"),
    )
}

fn figure_families() -> Verdict {
    let caption = MARKOV_CHANNELS == 10
        && MARKOV_TAU1 == 0.01
        && MARKOV_K_MINUS1 == [250.0, 500.0, 1000.0, 1500.0];
    let mut notes = Vec::new();
    let mut ok = caption;
    for fig in [Figure::Variance1, Figure::VarianceMarkov] {
        let data = figure_data(fig).map_err(|e| e.to_string())?;
        ok &= data.failures.is_empty()
            && data.curves.len() == 4
            && data.curves.iter().all(|c| c.unimodal);
        if fig == Figure::Variance1 {
            ok &= data.curves.iter().all(|c| c.peak <= 0.25 + 1e-15);
        }
        let tail = data.curves.iter().map(|c| c.tail_ratio).fold(0.0, f64::max);
        notes.push(format!(
            "{}: 4 unimodal curves, worst tail/peak {tail:.3}",
            fig.id()
        ));
    }
    pass_if(ok, notes.join("; "))
}

fn markov_exactness() -> Verdict {
    let strategy = (1u32..=10, 0u32..=15, 0.1f64..2.0, 0.1f64..2.0);
    let mut runner = TestRunner::deterministic();
    let (replicas, events_per_replica) = (40usize, 1e4);
    let mut worst_balance = 0.0f64;
    let mut worst_z = 0.0f64;
    let mut misses = Vec::new();
    for case in 0..20u64 {
        let (channels, agonists, tau1, k_minus1) =
            strategy.new_tree(&mut runner).unwrap().current();
        let spec = BirthDeathSpec {
            channels,
            agonists,
            tau1,
            k_minus1,
        };
        let exact = stationary_dist(&spec).map_err(|e| e.to_string())?;
        let lo = exact.k_min;
        let mut rate = 0.0;
        for (i, p) in exact.probabilities.iter().enumerate() {
            let k = lo + i as u32;
            let down = microchem::markov::binding_rate(k, &spec).unwrap();
            rate += p * (down + k_minus1 * f64::from(channels - k));
            if k > lo {
                // flux k -> k-1 against flux k-1 -> k
                let up = k_minus1 * f64::from(channels - k + 1);
                let r = (p * down - exact.probabilities[i - 1] * up).abs();
                worst_balance = worst_balance.max(r);
            }
        }
        let t_end = if rate > 0.0 {
            events_per_replica / rate
        } else {
            1.0
        };
        let mc = gillespie_birth_death(&spec, t_end, 0.05 * t_end, replicas, 1000 + case)
            .map_err(|e| e.to_string())?;
        let pooled_time = 0.95 * t_end * replicas as f64;
        for (i, (p, se)) in mc.occupancy.iter().zip(&mc.occupancy_std_error).enumerate() {
            let d = (p - exact.probabilities[i]).abs();
            let k = lo + i as u32;
            let exit = microchem::markov::binding_rate(k, &spec).unwrap()
                + k_minus1 * f64::from(channels - k);
            // a state never entered has no spread estimate; that outcome is
            // consistent while fewer than 3 entries are expected in the pool
            let unresolved = *se == 0.0 && exact.probabilities[i] * exit * pooled_time < 3.0;
            if d > 1e-12 && !unresolved {
                let z = if *se > 0.0 { d / se } else { f64::INFINITY };
                worst_z = worst_z.max(z);
                if z > 3.0 {
                    misses.push(format!(
                        "{spec:?} state {i}: {p} ± {se} vs {}",
                        exact.probabilities[i]
                    ));
                }
            }
        }
    }
    pass_if(
        worst_balance <= 1e-10 && misses.is_empty(),
        format!("balance residual {worst_balance:.1e}, largest deviation {worst_z:.2} SE, misses {misses:?}"),
    )
}

fn pushpull_mean() -> Verdict {
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
    let mc = simulate_pushpull(
        &params,
        SinkModel::LocalTime,
        McConfig::new(12.0, 5e-3, 2400, 10_000, 2024).unwrap(),
    )
    .map_err(|e| e.to_string())?
    .steady;
    let discrete = steady_mean(&params).map_err(|e| e.to_string())?.value;
    let continuum = continuum_profile(&params, 201)
        .map_err(|e| e.to_string())?
        .total;
    let gap = (continuum - discrete).abs();
    pass_if(
        mc.within(4.0 / 3.0, 3.0) && gap <= 1e-12 && (discrete - 4.0 / 3.0).abs() <= 1e-12,
        format!(
            "MC {:.4} ± {:.4} vs 4/3, continuum - discrete {gap:.1e}",
            mc.mean, mc.std_error
        ),
    )
}

fn poisson_limit() -> Verdict {
    let (gamma, a) = (3.7, 0.85);
    let mean = gamma / a;
    let var = steady_variance_with(gamma, 1.0 / a, a, |tau| Ok(1.0 / (tau + a)))
        .map_err(|e| e.to_string())?;
    pass_if(
        (var - mean).abs() <= 1e-10,
        format!("variance {var:.15} vs mean {mean:.15}"),
    )
}

fn decay_rate() -> Verdict {
    let params = PushPullParams {
        interval: Interval1D::normalized(),
        sink: 0.0,
        injection: Injection::At(0.0),
        gamma: 0.0,
        k1: 1.0,
    };
    let grid: Vec<f64> = (0..=60).map(|i| 0.5 * f64::from(i)).collect();
    let curve = estimate_survival(&params, &grid, SinkModel::LocalTime, 1e-2, 40_000, 7)
        .map_err(|e| e.to_string())?;
    let fitted = fit_decay_rate(&curve).map_err(|e| e.to_string())?;
    let predicted = alpha_normalized(0.0, 0.0, 1.0).unwrap();
    let eigen = slowest_decay_rate(&params).unwrap();
    let rel = (fitted - predicted).abs() / predicted;
    pass_if(
        rel <= 0.1,
        format!("fitted {fitted:.4} vs expansion {predicted:.4} (off by {:.0}%), slowest eigenvalue {eigen:.4}", 100.0 * rel),
    )
}

fn renewal_no_killing() -> Verdict {
    let gamma = 0.7;
    let t = 10.0 / gamma;
    let stats = mean_transient(&|_| 1.0, gamma, t, 1e-2).map_err(|e| e.to_string())?;
    let got = *stats.mean.last().unwrap();
    let want = 1.0 + gamma * t;
    pass_if(
        (got - want).abs() <= 1e-6,
        format!("N({t:.3}) = {got:.12} vs {want}"),
    )
}

fn michaelis_menten() -> Verdict {
    let spec = MMSpec {
        substrate: 5,
        enzymes: 2,
        k_minus1: 1.0,
        k2: 1.0,
        tau1: 1.0,
    };
    let times = [0.5, 1.0, 2.0, 5.0];
    let master = mm_master(&spec, 5.0, 0.5).map_err(|e| e.to_string())?;
    let mc = gillespie_mm(&spec, &times, 10_000, 9).map_err(|e| e.to_string())?;
    let mut worst_z = 0.0f64;
    for (j, &t) in times.iter().enumerate() {
        let idx = (t / 0.5).round() as usize;
        worst_z = worst_z
            .max((mc.product.mean[j] - master.mean_product[idx]).abs() / mc.product.std_error[j]);
    }
    let long = mm_master(&spec, 200.0, 5.0).map_err(|e| e.to_string())?;
    let completion = (long.mean_product.last().unwrap() - 5.0).abs();
    let conservation = long
        .mean_bound
        .iter()
        .zip(&long.mean_free_enzyme)
        .chain(master.mean_bound.iter().zip(&master.mean_free_enzyme))
        .map(|(b, f)| (b + f - 2.0).abs())
        .fold(0.0, f64::max);
    pass_if(
        worst_z <= 3.0 && completion <= 1e-8 && conservation <= 1e-10,
        format!("largest deviation {worst_z:.2} SE, |P(inf) - M0| {completion:.1e}, enzyme drift {conservation:.1e}"),
    )
}

fn discrepancy_report() -> Verdict {
    let config =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/pushpull_interior.toml");
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = Command::new(env!("CARGO_BIN_EXE_microchem"))
        .args(["compare", "--quiet", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(out.path())
        .output()
        .map_err(|e| e.to_string())?;
    let csv = std::fs::read_to_string(out.path().join("pushpull_interior.csv"))
        .map_err(|e| e.to_string())?;
    let manifest = std::fs::read_to_string(out.path().join("pushpull_interior.manifest.json"))
        .map_err(|e| e.to_string())?;
    let formula = csv
        .lines()
        .find(|l| l.starts_with("steady_mean_formula,"))
        .unwrap_or("");
    let exact = csv
        .lines()
        .find(|l| l.starts_with("steady_mean_exact,"))
        .unwrap_or("");
    let ok = run.status.code() == Some(0)
        && formula.contains("OUT_OF_DOMAIN")
        && exact.contains("mc_pushpull")
        && exact.contains("PASS")
        && manifest.contains("steady_mean_formula_out_of_domain");
    pass_if(
        ok,
        format!(
            "exit {:?}; formula row OUT_OF_DOMAIN, oracle row {}",
            run.status.code(),
            exact.split(',').nth(8).unwrap_or("missing")
        ),
    )
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "closed-form evaluations",
            limit: Duration::from_millis(1),
            known_failure: false,
            check: closed_forms,
        },
        Criterion {
            id: 2,
            name: "two-state steady state on 256 cells",
            limit: Duration::from_secs(10),
            known_failure: false,
            check: two_state_steady,
        },
        Criterion {
            id: 3,
            name: "variance figure families",
            limit: Duration::from_secs(30),
            known_failure: false,
            check: figure_families,
        },
        Criterion {
            id: 4,
            name: "birth-death stationary law vs Gillespie",
            limit: Duration::from_secs(120),
            known_failure: false,
            check: markov_exactness,
        },
        Criterion {
            id: 5,
            name: "push-pull steady mean vs particle oracle",
            limit: Duration::from_secs(300),
            known_failure: false,
            check: pushpull_mean,
        },
        Criterion {
            id: 6,
            name: "Poisson limit of the steady variance",
            limit: Duration::from_millis(1),
            known_failure: false,
            check: poisson_limit,
        },
        Criterion {
            id: 7,
            name: "decay rate expansion vs fitted survival",
            limit: Duration::from_secs(120),
            known_failure: true,
            check: decay_rate,
        },
        Criterion {
            id: 8,
            name: "renewal solver without killing",
            limit: Duration::from_secs(1),
            known_failure: false,
            check: renewal_no_killing,
        },
        Criterion {
            id: 9,
            name: "Michaelis-Menten master vs Gillespie",
            limit: Duration::from_secs(60),
            known_failure: false,
            check: michaelis_menten,
        },
        Criterion {
            id: 10,
            name: "interior-sink discrepancy report",
            limit: Duration::from_secs(300),
            known_failure: false,
            check: discrepancy_report,
        },
    ];
    let mut gate = true;
    for c in &criteria {
        let start = Instant::now();
        let verdict = (c.check)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let (passed, detail) = match verdict {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        let status = if passed { "PASS" } else { "FAIL" };
        let note = if c.known_failure && !passed {
            " [known failure, not gated]"
        } else {
            ""
        };
        println!(
            "criterion {:>2} {status} {} ({:.3} s, limit {:.3} s{}): {detail}{note}",
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            c.limit.as_secs_f64(),
            if in_time { "" } else { ", over limit" }
        );
        gate &= passed || c.known_failure;
    }
    println!("acceptance gate: {}", if gate { "PASS" } else { "FAIL" });
    if !gate {
        std::process::exit(1);
    }
}
