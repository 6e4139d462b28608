use serde::{Deserialize, Serialize};

use super::spec::{kbe_step, level_potential, sampler, validate_fs, EtaSpec, McSpec};
use crate::drift::{condition_report, eta_threshold, AntisymmetricField, ConditionReport, DriftSpec};
use crate::kbe::{solve_with, KbeOperator, KbeOptions};
use crate::par::{map_indexed, Execution};
use crate::sde::{simulate_observed, DriftSampler, InitialDensity, Observer, SimConfig};
use crate::spectral::TrigPolynomial;
use crate::stats::{gls, wls, LineFit, MeanEstimate, Z95};
use crate::{Error, Result};

/// Where the reference expectation comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum OracleMode {
    /// `⟨η, v(t)⟩` from the backward equation at level `n_ref`.
    Kbe {
        n_ref: f64,
        /// Solver step; chosen below the transport gate when absent.
        #[serde(default)]
        dt: Option<f64>,
    },
    /// `|MC_{2n} − MC_n|` with common random numbers.
    SelfDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateExperiment {
    pub drift: DriftSpec,
    pub levels: Vec<f64>,
    pub fs: Vec<TrigPolynomial>,
    #[serde(default = "uniform")]
    pub eta: EtaSpec,
    pub mc: McSpec,
    pub oracle: OracleMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

fn uniform() -> EtaSpec {
    EtaSpec::Uniform
}

/// Weak error at one level.
#[derive(Debug, Clone, Serialize)]
pub struct LevelError {
    pub n: f64,
    /// `e_n`: the sup over checkpoints and test functions, or the
    /// geometric-tail sum in self-difference mode.
    pub error: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Raw `d_n = |MC_{2n} − MC_n|` (self-difference mode only).
    pub raw_difference: Option<f64>,
    pub raw_se: Option<f64>,
    /// Checkpoint time and test-function index attaining the sup.
    pub time: f64,
    pub f_index: usize,
    pub informative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateVerdict {
    /// Every error is zero within its CI; the slope is undefined.
    Exact,
    /// Fitted `β̂` is compatible with `[0, β_max)`.
    Consistent,
    /// `β̂` lies above `β_max` beyond its CI.
    AboveBound,
    /// `β̂` is negative beyond its CI.
    Negative,
    /// Fewer than two informative levels.
    Undetermined,
}

/// How the log-log slope was fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// Weighted least squares with independent per-level errors.
    Wls,
    /// Generalized least squares with the empirical covariance of the
    /// levels, which share paths through common random numbers.
    GlsCoupled,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub condition: ConditionReport,
    pub out_of_theory: bool,
    pub oracle: OracleMode,
    pub seed: u64,
    pub eta: String,
    pub levels: Vec<LevelError>,
    /// `sqrt(mean se_n²)`; levels with `e_n < 2·noise_floor` are excluded.
    pub noise_floor: f64,
    pub fit: Option<LineFit>,
    pub fit_method: FitMethod,
    pub beta_hat: Option<f64>,
    pub beta_ci: Option<(f64, f64)>,
    pub beta_max: f64,
    pub verdict: RateVerdict,
    /// Strict decrease of `e_n` over the informative levels.
    pub decreasing: bool,
    pub reference_dt: Option<f64>,
}

struct ValueObserver<'a> {
    fs: &'a [TrigPolynomial],
    side: f64,
    steps: &'a [usize],
    next: usize,
    out: Vec<f64>,
}

impl Observer for ValueObserver<'_> {
    type Output = Vec<f64>;
    fn observe(&mut self, step: usize, _t: f64, x: &[f64], _y: &[f64]) {
        while self.next < self.steps.len() && self.steps[self.next] == step {
            self.out.extend(self.fs.iter().map(|f| f.eval(self.side, x)));
            self.next += 1;
        }
    }
    fn finish(self) -> Vec<f64> {
        self.out
    }
}

/// Per-path values `f_j(X_{t_k})`, laid out `[path][k][j]`.
pub(crate) fn path_values(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    fs: &[TrigPolynomial],
    checkpoints: usize,
) -> Result<Vec<Vec<f64>>> {
    let steps = cfg.steps()?;
    let at: Vec<usize> = (1..=checkpoints).map(|k| k * steps / checkpoints).collect();
    let side = drift.side();
    simulate_observed(cfg, drift, eta, |_| ValueObserver {
        fs,
        side,
        steps: &at,
        next: 0,
        out: Vec::with_capacity(at.len() * fs.len()),
    })
}

/// Column `c` of per-path values as an estimate.
fn column(values: &[Vec<f64>], c: usize) -> MeanEstimate {
    MeanEstimate::from_samples(&values.iter().map(|v| v[c]).collect::<Vec<_>>())
}

fn paired(a: &[Vec<f64>], b: &[Vec<f64>], c: usize) -> MeanEstimate {
    MeanEstimate::from_samples(&a.iter().zip(b).map(|(x, y)| x[c] - y[c]).collect::<Vec<_>>())
}

/// `⟨η, v_j(t_k)⟩` for every checkpoint and test function, `[k][j]`.
pub(crate) fn kbe_reference(
    a: &AntisymmetricField,
    fs: &[TrigPolynomial],
    eta: &InitialDensity,
    mc: &McSpec,
    dt: Option<f64>,
    exec: Execution,
) -> Result<(Vec<f64>, f64)> {
    let op = KbeOperator::from_potential(a);
    let dt = dt.unwrap_or_else(|| kbe_step(&op, mc.horizon, mc.checkpoints));
    let times = mc.checkpoint_times();
    let grid = *a.grid();
    let per_f: Vec<Result<Vec<f64>>> = map_indexed(fs.len(), exec, |j| {
        let v0 = fs[j].sample(&grid)?;
        let run = solve_with(&op, &v0, &KbeOptions::new(mc.horizon, dt).with_slices(times.clone()))?;
        times.iter().map(|&t| eta.expectation(run.slice(t)?)).collect()
    });
    let per_f = per_f.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(times.len() * fs.len());
    for k in 0..times.len() {
        for f in &per_f {
            out.push(f[k]);
        }
    }
    Ok((out, dt))
}

fn validate(exp: &RateExperiment) -> Result<()> {
    if exp.levels.len() < 4 {
        return Err(Error::config("levels", format!("need at least 4 levels, got {}", exp.levels.len())));
    }
    if exp.levels.iter().any(|n| !(*n > 0.0)) || exp.levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("levels", "levels must be positive and increasing"));
    }
    exp.mc.validate()?;
    validate_fs(&exp.fs, &exp.drift.grid.build()?)?;
    if let OracleMode::Kbe { n_ref, .. } = exp.oracle {
        let top = exp.levels[exp.levels.len() - 1];
        if n_ref < 8.0 * top {
            return Err(Error::config("oracle.n_ref", format!("n_ref = {n_ref} must be at least 8·n_max = {}", 8.0 * top)));
        }
    }
    Ok(())
}

/// Measures the weak error across mollification levels and fits its decay.
pub fn weak_rate(exp: &RateExperiment) -> Result<RateReport> {
    validate(exp)?;
    let grid = exp.drift.grid.build()?;
    let a = exp.drift.build_on(&grid)?;
    let eta = exp.eta.build(&grid)?;
    let condition = condition_report(&exp.drift, grid.dim());
    let cfg = {
        let mut c = exp.mc.sim(exp.seed);
        c.execution = exp.execution;
        c
    };
    let nk = exp.mc.checkpoints;
    let nf = exp.fs.len();
    let times = exp.mc.checkpoint_times();
    let mut sim_levels = exp.levels.clone();
    if matches!(exp.oracle, OracleMode::SelfDifference) {
        sim_levels.push(2.0 * exp.levels[exp.levels.len() - 1]);
    }
    // every level passes the gate before any expensive work starts
    let samplers: Vec<(f64, DriftSampler)> = sim_levels
        .iter()
        .map(|&n| {
            let s = sampler(&level_potential(&a, n)?, &exp.mc)?;
            if exp.mc.dt > s.max_dt() {
                return Err(Error::StabilityGate { dt: exp.mc.dt, required: s.max_dt() });
            }
            Ok((n, s))
        })
        .collect::<Result<_>>()?;
    let simulate = |n: f64| -> Result<Vec<Vec<f64>>> {
        let s = &samplers.iter().find(|(m, _)| *m == n).expect("sampler built for every level").1;
        path_values(&cfg, s, &eta, &exp.fs, nk)
    };
    let locate = |c: usize| (times[c / nf], c % nf);

    let mut reference_dt = None;
    let mut levels = Vec::with_capacity(exp.levels.len());
    // per level: signed deviations of the selected column (kbe oracle only)
    let mut coupled: Vec<(f64, Vec<f64>)> = Vec::new();
    match &exp.oracle {
        OracleMode::Kbe { n_ref, dt } => {
            let (reference, used) = kbe_reference(&level_potential(&a, *n_ref)?, &exp.fs, &eta, &exp.mc, *dt, exp.execution)?;
            reference_dt = Some(used);
            for &n in &exp.levels {
                let vals = simulate(n)?;
                let (c, est, err) = (0..nk * nf)
                    .map(|c| {
                        let est = column(&vals, c);
                        (c, est, (est.mean - reference[c]).abs())
                    })
                    .fold(None, |best: Option<(usize, MeanEstimate, f64)>, x| match best {
                        Some(b) if b.2 >= x.2 => Some(b),
                        _ => Some(x),
                    })
                    .expect("at least one column");
                let (time, f_index) = locate(c);
                coupled.push(((est.mean - reference[c]).signum(), vals.iter().map(|v| v[c] - est.mean).collect()));
                levels.push(LevelError {
                    n,
                    error: err,
                    se: est.se,
                    ci_low: (err - Z95 * est.se).max(0.0),
                    ci_high: err + Z95 * est.se,
                    raw_difference: None,
                    raw_se: None,
                    time,
                    f_index,
                    informative: false,
                });
            }
        }
        OracleMode::SelfDifference => {
            let grid_levels = sim_levels.clone();
            let vals: Vec<Vec<Vec<f64>>> = grid_levels.iter().map(|&n| simulate(n)).collect::<Result<_>>()?;
            let position = |n: f64| grid_levels.iter().position(|&m| (m - n).abs() <= 1e-9 * n);
            // raw differences per level, sup over columns
            let mut raw = Vec::new();
            for (i, &n) in exp.levels.iter().enumerate() {
                let j = position(2.0 * n).ok_or_else(|| {
                    Error::config("levels", format!("self-difference needs level 2n = {} to be present", 2.0 * n))
                })?;
                let (c, est) = (0..nk * nf)
                    .map(|c| (c, paired(&vals[j], &vals[i], c)))
                    .fold(None, |best: Option<(usize, MeanEstimate)>, x| match best {
                        Some(b) if b.1.mean.abs() >= x.1.mean.abs() => Some(b),
                        _ => Some(x),
                    })
                    .expect("at least one column");
                raw.push((c, est));
            }
            for (i, &n) in exp.levels.iter().enumerate() {
                // e_n ≤ Σ_{i≥0} d_{2^i n} over the available chain
                let (mut sum, mut var) = (0.0, 0.0);
                let mut m = n;
                while let Some(k) = exp.levels.iter().position(|&l| (l - m).abs() <= 1e-9 * m) {
                    sum += raw[k].1.mean.abs();
                    var += raw[k].1.se * raw[k].1.se;
                    m *= 2.0;
                }
                let se = var.sqrt();
                let (time, f_index) = locate(raw[i].0);
                levels.push(LevelError {
                    n,
                    error: sum,
                    se,
                    ci_low: (sum - Z95 * se).max(0.0),
                    ci_high: sum + Z95 * se,
                    raw_difference: Some(raw[i].1.mean.abs()),
                    raw_se: Some(raw[i].1.se),
                    time,
                    f_index,
                    informative: false,
                });
            }
        }
    }

    let noise_floor = (levels.iter().map(|l| l.se * l.se).sum::<f64>() / levels.len() as f64).sqrt();
    for l in &mut levels {
        l.informative = l.error > 0.0 && l.error >= 2.0 * noise_floor;
    }
    let keep: Vec<usize> = (0..levels.len()).filter(|&i| levels[i].informative).collect();
    let used: Vec<&LevelError> = keep.iter().map(|&i| &levels[i]).collect();
    let exact = levels.iter().all(|l| l.error <= Z95 * l.se);
    let mut fit_method = FitMethod::Wls;
    let fit = if used.len() >= 2 {
        let xs: Vec<f64> = used.iter().map(|l| l.n.ln()).collect();
        let ys: Vec<f64> = used.iter().map(|l| l.error.ln()).collect();
        // delta method: cov(log e_i, log e_j) ≈ s_i s_j cov(mean_i, mean_j) / (e_i e_j)
        let gls_fit = (!coupled.is_empty()).then(|| {
            let m = coupled[0].1.len() as f64;
            let cov: Vec<Vec<f64>> = keep
                .iter()
                .map(|&i| {
                    keep.iter()
                        .map(|&j| {
                            let (si, di) = &coupled[i];
                            let (sj, dj) = &coupled[j];
                            let c = di.iter().zip(dj).map(|(a, b)| a * b).sum::<f64>() / ((m - 1.0) * m);
                            si * sj * c / (levels[i].error * levels[j].error)
                        })
                        .collect()
                })
                .collect();
            gls(&xs, &ys, &cov)
        });
        match gls_fit.flatten() {
            Some(f) => {
                fit_method = FitMethod::GlsCoupled;
                Some(f)
            }
            None => {
                let sig: Vec<f64> = used.iter().map(|l| (l.se / l.error).max(1e-12)).collect();
                wls(&xs, &ys, &sig)
            }
        }
    } else {
        None
    };
    let beta_max = condition.beta_max;
    let beta_hat = fit.map(|f| -f.slope);
    let beta_ci = fit.map(|f| (-f.ci_high, -f.ci_low));
    let verdict = match (exact, beta_ci) {
        (true, _) => RateVerdict::Exact,
        (false, None) => RateVerdict::Undetermined,
        (false, Some((lo, hi))) => {
            if lo >= beta_max {
                RateVerdict::AboveBound
            } else if hi < 0.0 {
                RateVerdict::Negative
            } else {
                RateVerdict::Consistent
            }
        }
    };
    let decreasing = used.windows(2).all(|w| w[1].error < w[0].error);
    Ok(RateReport {
        out_of_theory: !condition.in_theory,
        condition,
        oracle: exp.oracle.clone(),
        seed: exp.seed,
        eta: exp.eta.label(),
        levels,
        noise_floor,
        fit,
        fit_method,
        beta_hat,
        beta_ci,
        beta_max,
        verdict,
        decreasing,
        reference_dt,
    })
}

/// One initial law in an η scan.
#[derive(Debug, Clone, Serialize)]
pub struct EtaRow {
    pub eta: String,
    pub q: Option<f64>,
    pub norm: f64,
    /// `max{1, ‖η‖_{L^q}}`.
    pub prefactor: f64,
    /// `q_η` threshold at `β = β_max`.
    pub threshold: Option<f64>,
    pub in_theory: bool,
    pub report: RateReport,
    /// `e_n(η)/e_n(η₀)` per level against the first law in the list.
    pub ratios: Vec<f64>,
    /// Lower CI end of each ratio does not exceed the prefactor ratio.
    pub ratio_within_prefactor: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EtaSensitivity {
    pub rows: Vec<EtaRow>,
}

/// Repeats [`weak_rate`] for each initial law with shared seeds.
pub fn eta_sensitivity(exp: &RateExperiment, etas: &[EtaSpec]) -> Result<EtaSensitivity> {
    if etas.is_empty() {
        return Err(Error::config("etas", "need at least one initial law"));
    }
    let grid = exp.drift.grid.build()?;
    let mut rows: Vec<EtaRow> = Vec::with_capacity(etas.len());
    for spec in etas {
        let eta = spec.build(&grid)?;
        let q = spec.q();
        let norm = eta.lp_norm(&grid, q)?;
        let prefactor = norm.max(1.0);
        let beta_max = 1.0 - 2.0 / exp.drift.p - exp.drift.gamma;
        let threshold = eta_threshold(exp.drift.p, exp.drift.gamma, beta_max);
        let in_theory = threshold.is_some_and(|th| q > th);
        let mut e = exp.clone();
        e.eta = spec.clone();
        let report = weak_rate(&e)?;
        let (ratios, ok) = match rows.first() {
            None => (vec![1.0; report.levels.len()], vec![true; report.levels.len()]),
            Some(base) => report
                .levels
                .iter()
                .zip(&base.report.levels)
                .map(|(l, b)| {
                    let ratio = if b.error > 0.0 { l.error / b.error } else { f64::NAN };
                    let low = (l.error - Z95 * l.se).max(0.0) / (b.error + Z95 * b.se);
                    (ratio, low <= prefactor / base.prefactor)
                })
                .unzip(),
        };
        rows.push(EtaRow {
            eta: spec.label(),
            q: q.is_finite().then_some(q),
            norm,
            prefactor,
            threshold,
            in_theory,
            report,
            ratios,
            ratio_within_prefactor: ok,
        });
    }
    Ok(EtaSensitivity { rows })
}
