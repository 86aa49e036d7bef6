//! Curve families behind the two variance figures.

use std::str::FromStr;

use microchem::curves::{argmax_leftmost, is_unimodal};
use microchem::markov::{stationary_dist, BirthDeathSpec};
use microchem::pde_master::variance_bound;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::output::CsvTable;

/// `k₁Δx/(N_S k₋₁)` values of the normalized-variance family.
pub const VARIANCE1_RATIOS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const VARIANCE1_M0_MAX: f64 = 2000.0;
pub const VARIANCE1_M0_STEP: f64 = 0.5;

pub const MARKOV_CHANNELS: u32 = 10;
pub const MARKOV_TAU1: f64 = 0.01;
pub const MARKOV_K_MINUS1: [f64; 4] = [250.0, 500.0, 1000.0, 1500.0];
pub const MARKOV_M_MAX: u32 = 1000;

/// End values must fall below this fraction of the peak.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Figure {
    Variance1,
    VarianceMarkov,
}

impl Figure {
    pub fn id(self) -> &'static str {
        match self {
            Figure::Variance1 => "variance1",
            Figure::VarianceMarkov => "varianceMarkov",
        }
    }
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "variance1" => Ok(Figure::Variance1),
            "varianceMarkov" | "variance_markov" => Ok(Figure::VarianceMarkov),
            other => Err(CliError::Usage(format!(
                "unknown figure id '{other}' (expected variance1 or varianceMarkov)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveCheck {
    /// Family parameter of this curve.
    pub parameter: f64,
    pub peak: f64,
    pub peak_at: f64,
    /// `max(first, last) / peak`.
    pub tail_ratio: f64,
    pub unimodal: bool,
}

#[derive(Debug, Clone)]
pub struct FigureData {
    pub figure: Figure,
    pub table: CsvTable,
    pub curves: Vec<CurveCheck>,
    pub failures: Vec<String>,
}

fn check(parameter: f64, xs: &[f64], ys: &[f64]) -> CurveCheck {
    let i = argmax_leftmost(ys).unwrap_or(0);
    let peak = ys[i];
    CurveCheck {
        parameter,
        peak,
        peak_at: xs[i],
        tail_ratio: ys[0].max(ys[ys.len() - 1]) / peak,
        unimodal: is_unimodal(ys, TAIL_FRACTION),
    }
}

pub fn figure_data(figure: Figure) -> Result<FigureData, CliError> {
    match figure {
        Figure::Variance1 => variance1(),
        Figure::VarianceMarkov => variance_markov(),
    }
}

fn variance1() -> Result<FigureData, CliError> {
    let n = (VARIANCE1_M0_MAX / VARIANCE1_M0_STEP).round() as usize;
    let m0: Vec<f64> = (0..=n).map(|i| i as f64 * VARIANCE1_M0_STEP).collect();
    let mut table = CsvTable::new(&["ratio", "m0", "rho", "variance"]);
    let mut curves = Vec::new();
    let mut failures = Vec::new();
    for &r in &VARIANCE1_RATIOS {
        let ys: Vec<f64> = m0.iter().map(|&m| variance_bound(m * r)).collect();
        for (&m, &y) in m0.iter().zip(&ys) {
            table.push_nums(&[r, m, m * r, y]);
        }
        let c = check(r, &m0, &ys);
        if !c.unimodal {
            failures.push(format!(
                "ratio {r}: curve is not unimodal with vanishing tails"
            ));
        }
        if c.peak > 0.25 {
            failures.push(format!("ratio {r}: peak {} exceeds 1/4", c.peak));
        }
        curves.push(c);
    }
    Ok(FigureData {
        figure: Figure::Variance1,
        table,
        curves,
        failures,
    })
}

fn variance_markov() -> Result<FigureData, CliError> {
    let ms: Vec<u32> = (0..=MARKOV_M_MAX).collect();
    let xs: Vec<f64> = ms.iter().map(|&m| f64::from(m)).collect();
    let mut table = CsvTable::new(&["k_minus1", "m", "mean_open", "variance"]);
    let mut curves = Vec::new();
    let mut failures = Vec::new();
    for &k in &MARKOV_K_MINUS1 {
        let points: Vec<(f64, f64)> = ms
            .par_iter()
            .map(|&m| {
                let spec = BirthDeathSpec {
                    channels: MARKOV_CHANNELS,
                    agonists: m,
                    tau1: MARKOV_TAU1,
                    k_minus1: k,
                };
                stationary_dist(&spec).map(|s| (s.mean_open, s.variance_open))
            })
            .collect::<Result<_, _>>()?;
        for (&m, &(mean, var)) in xs.iter().zip(&points) {
            table.push_nums(&[k, m, mean, var]);
        }
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let c = check(k, &xs, &ys);
        if !c.unimodal {
            failures.push(format!(
                "k_minus1 {k}: curve is not unimodal with vanishing tails"
            ));
        }
        curves.push(c);
    }
    Ok(FigureData {
        figure: Figure::VarianceMarkov,
        table,
        curves,
        failures,
    })
}
