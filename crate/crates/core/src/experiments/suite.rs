use serde::{Deserialize, Serialize};

use super::spec::{kbe_step, level_potential, sampler, EtaSpec, McSpec};
use crate::drift::{condition_report, ConditionReport, DriftSpec};
use crate::kbe::{solve_with, KbeOperator, KbeOptions};
use crate::par::Execution;
use crate::sde::{
    incompressibility_check, ito_trick, martingale_diagnostics, stopped_composition_test,
    IncompressibilityReport, ItoTrickReport, MartingaleReport, StoppedReport, TimeSlices,
};
use crate::spectral::TrigPolynomial;
use crate::{Error, Result};

fn two() -> f64 {
    2.0
}

fn box_sides() -> Vec<f64> {
    vec![0.125, 0.25, 0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub drift: DriftSpec,
    /// Mollification level of the drift.
    pub level: f64,
    pub mc: McSpec,
    #[serde(default = "uniform")]
    pub eta: EtaSpec,
    /// Martingale test function; also the terminal condition of the
    /// backward slices for the stopped composition.
    pub f: TrigPolynomial,
    /// Itô-trick functions `g` (the integrand is `Δg`).
    pub gs: Vec<TrigPolynomial>,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "two")]
    pub kappa: f64,
    /// Stopping radius around the drift's singular set.
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "box_sides")]
    pub box_sides: Vec<f64>,
    /// Relative slack on the incompressibility bound.
    #[serde(default = "tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

fn tolerance() -> f64 {
    0.1
}

fn uniform() -> EtaSpec {
    EtaSpec::Uniform
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub condition: ConditionReport,
    pub level: f64,
    pub seed: u64,
    pub incompressibility: IncompressibilityReport,
    pub incompressible: bool,
    pub ito: ItoTrickReport,
    pub ito_ok: bool,
    pub martingale: MartingaleReport,
    pub martingale_ok: bool,
    pub stopped: StoppedReport,
    pub stopped_ok: bool,
    pub pass: bool,
}

/// Runs the four energy-solution diagnostics on one mollified drift.
pub fn energy_solution_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.mc.validate()?;
    if cfg.gs.is_empty() {
        return Err(Error::config("gs", "need at least one Itô-trick function"));
    }
    let grid = cfg.drift.grid.build()?;
    let a = level_potential(&cfg.drift.build_on(&grid)?, cfg.level)?;
    let s = sampler(&a, &cfg.mc)?;
    let eta = cfg.eta.build(&grid)?;
    let mut sim = cfg.mc.sim(cfg.seed);
    sim.execution = cfg.execution;
    let centres = vec![vec![grid.side() / 2.0; grid.dim()]];

    let incompressibility =
        incompressibility_check(&sim, &s, &eta, &cfg.box_sides, &centres, cfg.mc.checkpoints, cfg.tolerance)?;
    let incompressible = incompressibility.bounded && incompressibility.uniform_ok.unwrap_or(true);

    let ito = ito_trick(&sim, &s, &eta, &cfg.gs, cfg.p, cfg.kappa, &grid)?;
    let ito_ok = ito.gradient_ratios.iter().all(|r| r.is_finite());

    let martingale = martingale_diagnostics(&sim, &s, &eta, &cfg.f, cfg.mc.checkpoints)?;
    let (lo, hi) = martingale.qv_ci;
    let qv_ok = martingale.qv_relative_error.abs() <= 0.05
        || (lo <= martingale.predicted_qv.mean && martingale.predicted_qv.mean <= hi);
    let martingale_ok = martingale.zero_mean && martingale.uncorrelated && qv_ok;

    let op = KbeOperator::from_potential(&a);
    let dt = kbe_step(&op, cfg.mc.horizon, cfg.mc.checkpoints);
    let mut times = vec![0.0];
    times.extend(cfg.mc.checkpoint_times());
    let run = solve_with(&op, &cfg.f.sample(&grid)?, &KbeOptions::new(cfg.mc.horizon, dt).with_slices(times.clone()))?;
    let fields = times.iter().map(|&t| run.slice(t).cloned()).collect::<Result<Vec<_>>>()?;
    let slices = TimeSlices::new(times, fields)?;
    let k = cfg.drift.singular_set();
    let stopped = stopped_composition_test(&sim, &s, &eta, &k, cfg.delta, &slices, cfg.mc.checkpoints)?;
    let stopped_ok = stopped.zero_mean && stopped.identity_violations == 0 && stopped.sup_violations == 0;

    Ok(SuiteReport {
        condition: condition_report(&cfg.drift, grid.dim()),
        level: cfg.level,
        seed: cfg.seed,
        pass: incompressible && ito_ok && martingale_ok && stopped_ok,
        incompressibility,
        incompressible,
        ito,
        ito_ok,
        martingale,
        martingale_ok,
        stopped,
        stopped_ok,
    })
}

/// Itô-trick ratios at several levels with their spread.
#[derive(Debug, Clone, Serialize)]
pub struct ItoLevels {
    pub levels: Vec<f64>,
    pub max_ratios: Vec<f64>,
    /// `max/min` of the level maxima.
    pub spread: f64,
}

pub fn ito_across_levels(cfg: &SuiteConfig, levels: &[f64]) -> Result<ItoLevels> {
    let grid = cfg.drift.grid.build()?;
    let a = cfg.drift.build_on(&grid)?;
    let eta = cfg.eta.build(&grid)?;
    let mut sim = cfg.mc.sim(cfg.seed);
    sim.execution = cfg.execution;
    let max_ratios = levels
        .iter()
        .map(|&n| {
            let s = sampler(&level_potential(&a, n)?, &cfg.mc)?;
            Ok(ito_trick(&sim, &s, &eta, &cfg.gs, cfg.p, cfg.kappa, &grid)?.max_gradient_ratio)
        })
        .collect::<Result<Vec<f64>>>()?;
    let hi = max_ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = max_ratios.iter().cloned().fold(f64::MAX, f64::min);
    Ok(ItoLevels {
        levels: levels.to_vec(),
        spread: hi / lo,
        max_ratios,
    })
}
