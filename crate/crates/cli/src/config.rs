//! Experiment configuration: a TOML file with top-level `model`, `seed` and
//! `name`, one section per parameter bundle, and optional `[sweep]` /
//! `[series]` axes over any numeric key.

use std::path::{Path, PathBuf};

use microchem::markov::{BindingReading, Degradation};
use microchem::oracle::SinkModel;
use microchem::renewal::AlphaConvention;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

/// Model or simulation route selected by `model = "..."`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    TwoState,
    Ladder,
    BoundaryBinding,
    PushpullRenewal,
    PushpullContinuum,
    Markov,
    Mm,
    PushpullChain,
    McTwoState,
    McBoundaryBinding,
    McPushpull,
    McSurvival,
    McMarkov,
    McMm,
}

impl Model {
    pub const ALL: [Model; 14] = [
        Model::TwoState,
        Model::Ladder,
        Model::BoundaryBinding,
        Model::PushpullRenewal,
        Model::PushpullContinuum,
        Model::Markov,
        Model::Mm,
        Model::PushpullChain,
        Model::McTwoState,
        Model::McBoundaryBinding,
        Model::McPushpull,
        Model::McSurvival,
        Model::McMarkov,
        Model::McMm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::TwoState => "two_state",
            Model::Ladder => "ladder",
            Model::BoundaryBinding => "boundary_binding",
            Model::PushpullRenewal => "pushpull_renewal",
            Model::PushpullContinuum => "pushpull_continuum",
            Model::Markov => "markov",
            Model::Mm => "mm",
            Model::PushpullChain => "pushpull_chain",
            Model::McTwoState => "mc_two_state",
            Model::McBoundaryBinding => "mc_boundary_binding",
            Model::McPushpull => "mc_pushpull",
            Model::McSurvival => "mc_survival",
            Model::McMarkov => "mc_markov",
            Model::McMm => "mc_mm",
        }
    }

    pub fn is_monte_carlo(self) -> bool {
        self.name().starts_with("mc_")
    }
}

fn one() -> usize {
    1
}

/// Volume binding on a grid, shared by `two_state`, `ladder` and
/// `mc_two_state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterSection {
    pub length: f64,
    pub cells: usize,
    pub diffusion: f64,
    pub k1: f64,
    pub k_minus1: f64,
    /// Particle count `M₀`.
    pub particles: u32,
    pub sites_per_cell: u32,
    /// Cells `[start, end)` carrying sites; all cells when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_cells: Option<[usize; 2]>,
    /// Cells `[start, end)` holding the initial particles; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_cells: Option<[usize; 2]>,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

/// Sites on the wall `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub length: f64,
    pub cells: usize,
    pub diffusion: f64,
    pub k1: f64,
    pub k_minus1: f64,
    pub sites: u32,
    pub particles: u32,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn default_cells() -> usize {
    400
}

fn default_points() -> usize {
    201
}

/// Push-pull on `[0, L]`. `gamma` is the total injection rate; the
/// continuum route spreads it uniformly as `γ/L` per unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushPullSection {
    pub length: f64,
    pub diffusion: f64,
    pub sink: f64,
    /// Fixed injection point; uniform injection when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injection_at: Option<f64>,
    pub gamma: f64,
    pub k1: f64,
    /// Horizon and step of the transient renewal curves.
    pub t_end: f64,
    pub dt: f64,
    /// Grid used for the time-domain survival curve.
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Samples of the continuum profile.
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub alpha_convention: AlphaConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSection {
    pub channels: u32,
    pub agonists: u32,
    pub tau1: f64,
    pub k_minus1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmSection {
    pub substrate: u32,
    pub enzymes: u32,
    pub k_minus1: f64,
    pub k2: f64,
    pub tau1: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Times at which the Gillespie route and comparisons sample.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub channels: u32,
    pub k_minus1: f64,
    pub tau1: f64,
    pub gamma: f64,
    pub degradation_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<u32>,
    #[serde(default)]
    pub reading: BindingReading,
    #[serde(default)]
    pub degradation: Degradation,
    pub t_end: f64,
    pub dt: f64,
}

fn default_replicas() -> usize {
    1000
}

fn default_samples() -> usize {
    100
}

/// Settings shared by the `mc_*` routes. `t_end` falls back to the model
/// section's horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Particle time step (not used by the event-driven routes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default)]
    pub sink: SinkModel,
    /// Discarded initial span of the birth-death runs.
    #[serde(default)]
    pub burn_in: f64,
    /// Points of the survival time grid.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            replicas: default_replicas(),
            dt: None,
            t_end: None,
            record_every: 1,
            sink: SinkModel::default(),
            burn_in: 0.0,
            samples: default_samples(),
        }
    }
}

fn default_bands() -> f64 {
    3.0
}

fn default_rel_tol() -> f64 {
    0.05
}

fn default_tau() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub routes: Vec<Model>,
    /// Standard-error band for analytic vs oracle rows.
    #[serde(default = "default_bands")]
    pub bands: f64,
    /// Relative tolerance for deterministic vs deterministic rows with a
    /// modelling gap (chain vs slow-mixing formula).
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Laplace variable for survival comparisons.
    #[serde(default = "default_tau")]
    pub tau: f64,
}

/// A numeric axis: explicit `values`, or `start..=stop` by `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Dotted key such as `markov.agonists`.
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl Axis {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let bad = |msg: &str| CliError::Config(format!("axis '{}': {msg}", self.parameter));
        let points = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(h)) => {
                if !(h > 0.0 && h.is_finite() && a.is_finite() && b.is_finite()) {
                    return Err(bad("step must be positive and bounds finite"));
                }
                let n = ((b - a) / h + 1e-9).floor();
                if n < 0.0 {
                    return Err(bad("stop is below start"));
                }
                (0..=n as usize).map(|i| a + i as f64 * h).collect()
            }
            _ => {
                return Err(bad(
                    "give either `values` or all of `start`, `stop`, `step`",
                ))
            }
        };
        if points.is_empty() {
            return Err(bad("range is empty"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(bad("values must be finite"));
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Output directory, overridden by `--out` or the environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master: Option<MasterSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_binding: Option<BoundarySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pushpull: Option<PushPullSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov: Option<MarkovSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mm: Option<MmSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pushpull_chain: Option<ChainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Axis>,
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("missing [{section}] section"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, Table), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config =
            Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let table: Table = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok((config, table))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn master(&self) -> Result<&MasterSection, CliError> {
        self.master.as_ref().ok_or_else(|| missing("master"))
    }
    pub fn boundary(&self) -> Result<&BoundarySection, CliError> {
        self.boundary_binding
            .as_ref()
            .ok_or_else(|| missing("boundary_binding"))
    }
    pub fn pushpull(&self) -> Result<&PushPullSection, CliError> {
        self.pushpull.as_ref().ok_or_else(|| missing("pushpull"))
    }
    pub fn markov(&self) -> Result<&MarkovSection, CliError> {
        self.markov.as_ref().ok_or_else(|| missing("markov"))
    }
    pub fn mm(&self) -> Result<&MmSection, CliError> {
        self.mm.as_ref().ok_or_else(|| missing("mm"))
    }
    pub fn chain(&self) -> Result<&ChainSection, CliError> {
        self.pushpull_chain
            .as_ref()
            .ok_or_else(|| missing("pushpull_chain"))
    }
    pub fn mc(&self) -> McSection {
        self.mc.clone().unwrap_or_default()
    }

    /// Base name for output files.
    pub fn stem(&self, fallback: &str) -> String {
        self.name.clone().unwrap_or_else(|| fallback.to_string())
    }
}

/// Applies `--seed` and `--replicas` to the raw table so that sweep points
/// inherit them.
pub fn apply_overrides(
    table: &mut Table,
    seed: Option<u64>,
    replicas: Option<usize>,
) -> Result<(), CliError> {
    if let Some(s) = seed {
        let s = i64::try_from(s)
            .map_err(|_| CliError::Usage(format!("seed {s} does not fit in a TOML integer")))?;
        table.insert("seed".into(), Value::Integer(s));
    }
    if let Some(r) = replicas {
        let mc = table
            .entry("mc")
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config("`mc` must be a table".into()))?;
        mc.insert("replicas".into(), Value::Integer(r as i64));
    }
    Ok(())
}

/// Sets the dotted key `path` in `table` to `value`. The key must already
/// exist; an integer stays an integer when `value` is integral.
pub fn set_parameter(table: &mut Table, path: &str, value: f64) -> Result<(), CliError> {
    let not_found = || {
        CliError::Config(format!(
            "sweep parameter '{path}' does not exist in the configuration"
        ))
    };
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().ok_or_else(not_found)?;
    let mut current = table;
    for part in parts {
        current = current
            .get_mut(part)
            .and_then(Value::as_table_mut)
            .ok_or_else(not_found)?;
    }
    let slot = current.get_mut(last).ok_or_else(not_found)?;
    *slot = match slot {
        Value::Integer(_) if value.fract() == 0.0 && value.abs() < 9.0e15 => {
            Value::Integer(value as i64)
        }
        Value::Integer(_) | Value::Float(_) => Value::Float(value),
        _ => {
            return Err(CliError::Config(format!(
                "sweep parameter '{path}' is not numeric"
            )))
        }
    };
    Ok(())
}

/// Resolves the sweep into `(series value, sweep value, config)` points in
/// series-major order. A run without `[sweep]` yields no points.
pub fn expand_sweep(
    config: &ExperimentConfig,
    table: &Table,
) -> Result<Vec<(Option<f64>, f64, ExperimentConfig)>, CliError> {
    let Some(sweep) = &config.sweep else {
        if config.series.is_some() {
            return Err(CliError::Config("[series] needs a [sweep] axis".into()));
        }
        return Ok(Vec::new());
    };
    let xs = sweep.points()?;
    let series: Vec<Option<f64>> = match &config.series {
        Some(axis) => axis.points()?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut out = Vec::with_capacity(xs.len() * series.len());
    for s in &series {
        for &x in &xs {
            let mut t = table.clone();
            if let (Some(v), Some(axis)) = (s, &config.series) {
                set_parameter(&mut t, &axis.parameter, *v)?;
            }
            set_parameter(&mut t, &sweep.parameter, x)?;
            let point: ExperimentConfig = t.try_into().map_err(|e: toml::de::Error| {
                CliError::Config(format!("at {} = {x}: {e}", sweep.parameter))
            })?;
            out.push((*s, x, point));
        }
    }
    Ok(out)
}
