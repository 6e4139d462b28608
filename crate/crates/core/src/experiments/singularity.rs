use serde::{Deserialize, Serialize};

use super::spec::{level_potential, sampler, validate_fs, EtaSpec, McSpec};
use crate::besov::{besov_norm_vector, BesovIndex};
use crate::drift::{
    apply_cutoff, condition_report, cutoff, drift, measure_exponent, ConditionReport, DriftSpec, MeasureMode,
    SingularSet,
};
use crate::par::Execution;
use crate::sde::{first_entry, holder_norm, map_paths, occupation_time, DriftSampler, InitialDensity, SimConfig};
use crate::spectral::{TorusGrid, TrigPolynomial};
use crate::stats::{loglog_fit, LineFit, MeanEstimate, Proportion, Z95};
use crate::{Error, Result};

fn default_alpha() -> Option<f64> {
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingExperiment {
    /// Drift with its singular set `K`.
    pub drift: DriftSpec,
    pub eps: Vec<f64>,
    #[serde(rename = "L")]
    pub l_grid: Vec<f64>,
    /// Mollification level of `X^n` and `X^{ε,n}`.
    pub level: f64,
    /// Level standing in for the unmollified process.
    pub n_ref: f64,
    pub fs: Vec<TrigPolynomial>,
    #[serde(default = "uniform")]
    pub eta: EtaSpec,
    pub mc: McSpec,
    /// `δ` in the neighborhood hypothesis `Leb(B_ε(K)) ≲ ε^{2p/(p−2)+δ}`.
    pub delta: f64,
    /// Hölder exponent; defaults to `α = 1/2 − 1/q − 1/p`.
    #[serde(default = "default_alpha")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

fn uniform() -> EtaSpec {
    EtaSpec::Uniform
}

/// `L_min(ε) = (p/((1/α)ε^{δ̃}))^{1/(1/α+p)}`, `δ̃ = δ + 2p/(p−2) − 1/α`.
pub fn l_min(eps: f64, p: f64, alpha: f64, delta: f64) -> f64 {
    let ia = 1.0 / alpha;
    let dt = delta + 2.0 * p / (p - 2.0) - ia;
    (p / (ia * eps.powf(dt))).powf(1.0 / (ia + p))
}

/// Per-path summary used by the singularity experiment.
#[derive(Debug, Clone)]
struct PathSummary {
    /// `f_j(X_T)`.
    values: Vec<f64>,
    /// Entered `B_ε(K)` before `T`, per `ε`.
    hit: Vec<bool>,
    /// Time spent in `B_{2ε}(K)`, per `ε`.
    occupation: Vec<f64>,
    holder: f64,
}

fn summarize(
    cfg: &SimConfig,
    sampler: &DriftSampler,
    eta: &InitialDensity,
    k: &SingularSet,
    eps: &[f64],
    fs: &[TrigPolynomial],
    alpha: f64,
) -> Result<Vec<PathSummary>> {
    let grid = *sampler.grid();
    let d = grid.dim();
    let side = grid.side();
    let dt = cfg.dt;
    map_paths(cfg, sampler, eta, 1, &|_, path| {
        let last = &path[path.len() - d..];
        let end: Vec<f64> = last.iter().map(|x| x.rem_euclid(side)).collect();
        PathSummary {
            values: fs.iter().map(|f| f.eval(side, &end)).collect(),
            hit: eps
                .iter()
                .map(|&e| first_entry(path, dt, &grid, k, e).tau_index.is_some())
                .collect(),
            occupation: eps.iter().map(|&e| occupation_time(path, dt, &grid, k, 2.0 * e)).collect(),
            holder: holder_norm(path, d, dt, alpha),
        }
    })
}

fn hit_rate(s: &[PathSummary], i: usize) -> Proportion {
    Proportion::new(s.iter().filter(|p| p.hit[i]).count(), s.len())
}

/// Largest paired difference of terminal expectations over the test functions.
fn paired_gap(a: &[PathSummary], b: &[PathSummary], nf: usize) -> MeanEstimate {
    (0..nf)
        .map(|j| MeanEstimate::from_samples(&a.iter().zip(b).map(|(x, y)| x.values[j] - y.values[j]).collect::<Vec<_>>()))
        .fold(None, |best: Option<MeanEstimate>, e| match best {
            Some(b) if b.mean.abs() >= e.mean.abs() => Some(b),
            _ => Some(e),
        })
        .expect("at least one test function")
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    /// `P(τ^ε < T)` for `X`, `X^n`, `X^ε`, `X^{ε,n}` (proxies at `n_ref`).
    pub hit_reference: Proportion,
    pub hit_level: Proportion,
    pub hit_cutoff_reference: Proportion,
    pub hit_cutoff_level: Proportion,
    /// `|E f(X_T) − E f(X^{ε,n}_T)|` (paired).
    pub total_error: MeanEstimate,
    /// `|E f(X^ε_T) − E f(X^{ε,n}_T)|` (paired).
    pub rate_term: MeanEstimate,
    /// Upper CI of `rate_term + osc(f)·P(τ^ε(X) < T)`.
    pub envelope: f64,
    pub envelope_ok: bool,
    /// `‖b^ε‖_{B^{−γ}_{p,∞}}`.
    pub drift_norm: f64,
    pub l_min: f64,
    /// Two-term tradeoff over the L grid, from Markov bounds on the reference paths.
    pub tradeoff: Vec<f64>,
    pub argmin: usize,
    /// L-grid cell nearest to `L_min` in log scale.
    pub l_min_cell: usize,
    pub argmin_ok: bool,
    /// Median occupation time of `B_{2ε}(K)` on the paths that hit `B_ε(K)`.
    pub occupation_median: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularityReport {
    pub condition: ConditionReport,
    pub alpha: f64,
    pub seed: u64,
    pub excluded_eps: Vec<f64>,
    pub rows: Vec<EpsRow>,
    /// Fit of `log P(τ^ε(X) < T)` against `log ε`.
    pub hit_fit: Option<LineFit>,
    /// `δ(p−2)/p`.
    pub exponent_target: f64,
    /// Hit probability of the smallest `ε` is below that of the largest,
    /// with disjoint CIs.
    pub separated: bool,
    pub envelope_ok: bool,
    pub argmin_ok: bool,
}

pub fn singularity_rate(exp: &HittingExperiment) -> Result<SingularityReport> {
    exp.mc.validate()?;
    let grid = exp.drift.grid.build()?;
    validate_fs(&exp.fs, &grid)?;
    if exp.l_grid.len() < 2 || exp.l_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("L", "need an increasing grid of at least two values"));
    }
    let k = exp.drift.singular_set();
    if k.is_empty() {
        return Err(Error::config("drift.K", "singular set is empty"));
    }
    let condition = condition_report(&exp.drift, grid.dim());
    let alpha = exp.alpha.unwrap_or(condition.alpha);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha", format!("Hölder exponent {alpha} outside (0, 1)")));
    }
    let (eps, excluded): (Vec<f64>, Vec<f64>) = exp.eps.iter().partition(|&&e| e >= 4.0 * grid.spacing());
    if eps.is_empty() {
        return Err(Error::config("eps", "every ε lies below 4h"));
    }
    let a = exp.drift.build_on(&grid)?;
    let eta = exp.eta.build(&grid)?;
    let mut cfg = exp.mc.sim(exp.seed);
    cfg.execution = exp.execution;
    let nf = exp.fs.len();
    let osc = 2.0 * exp.fs.iter().map(|f| f.sup_bound()).fold(0.0, f64::max);
    let run = |pot| -> Result<Vec<PathSummary>> {
        summarize(&cfg, &sampler(&pot, &exp.mc)?, &eta, &k, &eps, &exp.fs, alpha)
    };
    let reference = run(level_potential(&a, exp.n_ref)?)?;
    let level = run(level_potential(&a, exp.level)?)?;
    let idx = BesovIndex::new(-exp.drift.gamma, exp.drift.p, f64::INFINITY)?;

    let mut rows = Vec::with_capacity(eps.len());
    for (i, &e) in eps.iter().enumerate() {
        let cut = apply_cutoff(&a, &cutoff(&k, &grid, e, 0.0)?)?;
        let drift_norm = besov_norm_vector(&drift(&cut), &idx).value;
        let cut_ref = run(level_potential(&cut, exp.n_ref)?)?;
        let cut_level = run(level_potential(&cut, exp.level)?)?;
        let total_error = paired_gap(&reference, &cut_level, nf);
        let rate_term = paired_gap(&cut_ref, &cut_level, nf);
        let hit_reference = hit_rate(&reference, i);
        let envelope = rate_term.mean.abs() + Z95 * rate_term.se + osc * hit_reference.ci_high;
        let measured_low = (total_error.mean.abs() - Z95 * total_error.se).max(0.0);

        let lm = l_min(e, exp.drift.p, alpha, exp.delta);
        // Markov bounds of the two events, estimated from the reference paths:
        // P(occ ≥ (ε/L)^{1/α}) ≤ (L/ε)^{1/α} E[occ], P(‖X‖_α > L) ≤ E[‖X‖_α^p] / L^p.
        let m = reference.len() as f64;
        let mean_occ = reference.iter().map(|p| p.occupation[i]).sum::<f64>() / m;
        let holder_moment = reference.iter().map(|p| p.holder.powf(exp.drift.p)).sum::<f64>() / m;
        let tradeoff: Vec<f64> = exp
            .l_grid
            .iter()
            .map(|&l| (l / e).powf(1.0 / alpha) * mean_occ + holder_moment / l.powf(exp.drift.p))
            .collect();
        let argmin = tradeoff
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (j, &v)| if v < b.1 { (j, v) } else { b })
            .0;
        let l_min_cell = exp
            .l_grid
            .iter()
            .enumerate()
            .map(|(j, &l)| (j, (l.ln() - lm.ln()).abs()))
            .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
            .0;
        let mut occ: Vec<f64> = reference.iter().filter(|p| p.hit[i]).map(|p| p.occupation[i]).collect();
        occ.sort_by(f64::total_cmp);
        rows.push(EpsRow {
            eps: e,
            hit_reference,
            hit_level: hit_rate(&level, i),
            hit_cutoff_reference: hit_rate(&cut_ref, i),
            hit_cutoff_level: hit_rate(&cut_level, i),
            total_error,
            rate_term,
            envelope,
            envelope_ok: envelope >= measured_low,
            drift_norm,
            l_min: lm,
            tradeoff,
            argmin,
            l_min_cell,
            argmin_ok: argmin.abs_diff(l_min_cell) <= 1,
            occupation_median: (!occ.is_empty()).then(|| crate::stats::median(&occ)),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let ps: Vec<f64> = rows.iter().map(|r| r.hit_reference.p).collect();
    let hit_fit = if ps.iter().all(|&p| p > 0.0) { loglog_fit(&xs, &ps) } else { None };
    let (lo, hi) = rows
        .iter()
        .fold((&rows[0], &rows[0]), |(lo, hi), r| (if r.eps < lo.eps { r } else { lo }, if r.eps > hi.eps { r } else { hi }));
    Ok(SingularityReport {
        alpha,
        seed: exp.seed,
        excluded_eps: excluded,
        hit_fit,
        exponent_target: exp.delta * (exp.drift.p - 2.0) / exp.drift.p,
        separated: rows.len() >= 2 && lo.hit_reference.ci_high < hi.hit_reference.ci_low,
        envelope_ok: rows.iter().all(|r| r.envelope_ok),
        argmin_ok: rows.iter().all(|r| r.argmin_ok),
        condition,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateVerdict {
    NeverHit,
    Unprotected,
}

#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    /// Fitted exponent of `ε ↦ Leb_{d+1}(B_ε(K))`; absent for empty `K`.
    pub exponent: Option<f64>,
    /// `1/α + δ`.
    pub required: f64,
    pub verdict: GateVerdict,
    /// `P(τ^ε < T)` per `ε` when a Monte Carlo cross-check was run.
    pub hits: Vec<(f64, Proportion)>,
    /// CI separation between the smallest and largest `ε`.
    pub decreasing: Option<bool>,
}

/// Compares the space-time neighborhood exponent of `K` with `1/α`.
pub fn hoelder_dimension_gate(
    k: &SingularSet,
    grid: &TorusGrid,
    alpha: f64,
    delta: f64,
    eps: &[f64],
    horizon: f64,
) -> Result<GateReport> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("alpha must be positive, got {alpha}")));
    }
    let required = 1.0 / alpha + delta;
    if k.is_empty() {
        return Ok(GateReport {
            exponent: None,
            required,
            verdict: GateVerdict::NeverHit,
            hits: vec![],
            decreasing: None,
        });
    }
    let (_, fit) = measure_exponent(k, grid, eps, horizon, MeasureMode::Analytic, true)?;
    let verdict = if fit.slope >= required - 1e-9 {
        GateVerdict::NeverHit
    } else {
        GateVerdict::Unprotected
    };
    Ok(GateReport {
        exponent: Some(fit.slope),
        required,
        verdict,
        hits: vec![],
        decreasing: None,
    })
}

/// Adds the empirical hitting scan to a gate report.
pub fn gate_cross_check(
    report: &mut GateReport,
    k: &SingularSet,
    cfg: &SimConfig,
    sampler: &DriftSampler,
    eta: &InitialDensity,
    eps: &[f64],
) -> Result<()> {
    let grid = *sampler.grid();
    let dt = cfg.dt;
    let hits: Vec<Vec<bool>> = map_paths(cfg, sampler, eta, 1, &|_, path| {
        eps.iter().map(|&e| first_entry(path, dt, &grid, k, e).tau_index.is_some()).collect()
    })?;
    report.hits = eps
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, Proportion::new(hits.iter().filter(|h| h[i]).count(), hits.len())))
        .collect();
    if report.hits.len() >= 2 {
        let lo = report.hits.iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("nonempty");
        let hi = report.hits.iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("nonempty");
        report.decreasing = Some(lo.1.ci_high < hi.1.ci_low);
    }
    Ok(())
}
