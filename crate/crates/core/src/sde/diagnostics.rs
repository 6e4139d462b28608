use serde::Serialize;

use super::engine::{checkpoint_steps, simulate_checkpoints, simulate_observed};
use super::{DriftSampler, InitialDensity, Observer, SimConfig};
use crate::besov::{besov_norm, BesovIndex};
use crate::drift::SingularSet;
use crate::spectral::{lp_norm, multilinear, ScalarField, TorusGrid, TrigPolynomial};
use crate::stats::{correlation, ks_test, normal_quantile, MeanEstimate, Proportion, Z95};
use crate::{Error, Result};

/// Moments of `sup_t |∫₀^t f(X_s) ds|` for one integrand.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalStats {
    pub sup_moment: MeanEstimate,
    pub terminal: MeanEstimate,
    pub max_sup: f64,
}

struct FunctionalObserver<'a> {
    fs: &'a [TrigPolynomial],
    side: f64,
    dt: f64,
    steps: usize,
    integral: Vec<f64>,
    sup: Vec<f64>,
}

impl Observer for FunctionalObserver<'_> {
    type Output = (Vec<f64>, Vec<f64>);
    fn observe(&mut self, step: usize, _t: f64, x: &[f64], _y: &[f64]) {
        // left-point Riemann sum
        for (j, f) in self.fs.iter().enumerate() {
            if step > 0 {
                self.sup[j] = self.sup[j].max(self.integral[j].abs());
            }
            if step < self.steps {
                self.integral[j] += f.eval(self.side, x) * self.dt;
            }
        }
    }
    fn finish(self) -> (Vec<f64>, Vec<f64>) {
        (self.sup, self.integral)
    }
}

/// Per-path `sup_{t_k} |Σ_{i<k} f(X_i) dt|` for every `f`, as
/// `[f][path]`, together with the terminal values.
fn functional_paths(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    fs: &[TrigPolynomial],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let side = drift.side();
    let steps = cfg.steps()?;
    let out = simulate_observed(cfg, drift, eta, |_| FunctionalObserver {
        fs,
        side,
        dt: cfg.dt,
        steps,
        integral: vec![0.0; fs.len()],
        sup: vec![0.0; fs.len()],
    })?;
    let mut sups = vec![Vec::with_capacity(out.len()); fs.len()];
    let mut terms = vec![Vec::with_capacity(out.len()); fs.len()];
    for (sup, integral) in out {
        for j in 0..fs.len() {
            sups[j].push(sup[j]);
            terms[j].push(integral[j]);
        }
    }
    Ok((sups, terms))
}

/// Riemann-sum additive functionals `∫₀^t f(X_s) ds` and the `p`-th
/// moment of their running supremum.
pub fn additive_functional(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    fs: &[TrigPolynomial],
    p: f64,
) -> Result<Vec<FunctionalStats>> {
    for f in fs {
        f.validate(drift.grid())?;
    }
    let (sups, terms) = functional_paths(cfg, drift, eta, fs)?;
    Ok(sups
        .iter()
        .zip(&terms)
        .map(|(s, t)| {
            let pow: Vec<f64> = s.iter().map(|v| v.powf(p)).collect();
            FunctionalStats {
                sup_moment: MeanEstimate::from_samples(&pow),
                terminal: MeanEstimate::from_samples(t),
                max_sup: s.iter().cloned().fold(0.0, f64::max),
            }
        })
        .collect())
}

/// Itô-trick ratios over a family of test functions `f = Δg`.
#[derive(Debug, Clone, Serialize)]
pub struct ItoTrickReport {
    pub p: f64,
    pub kappa: f64,
    pub eta_norm: f64,
    /// `E[sup_t|∫Δg|^p] / (‖η‖_{L^κ} T^{p/2} ‖∇g‖^p_{L^{pκ'}})`.
    pub gradient_ratios: Vec<f64>,
    /// Same numerator over `‖η‖_{L^κ} T^{p/2} ‖Δg‖^p_{B^{-1}_{pκ',2}}`.
    pub besov_ratios: Vec<f64>,
    pub max_gradient_ratio: f64,
    pub max_besov_ratio: f64,
}

fn conjugate(kappa: f64) -> f64 {
    if kappa.is_infinite() {
        1.0
    } else {
        kappa / (kappa - 1.0)
    }
}

/// Time-independent test functions make the `L^q_T` factor collapse: the
/// `T^{p/q}` from the time norm cancels `T^{−p/q}`, leaving `T^{p/2}`.
pub fn ito_trick(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    gs: &[TrigPolynomial],
    p: f64,
    kappa: f64,
    norm_grid: &TorusGrid,
) -> Result<ItoTrickReport> {
    if !(p >= 1.0 && kappa > 1.0) {
        return Err(Error::param(format!("need p >= 1 and kappa > 1, got p={p}, kappa={kappa}")));
    }
    let side = drift.side();
    let fs: Vec<TrigPolynomial> = gs.iter().map(|g| g.laplacian_poly(side)).collect();
    let stats = additive_functional(cfg, drift, eta, &fs, p)?;
    let eta_norm = eta.lp_norm(norm_grid, kappa)?;
    let r = p * conjugate(kappa);
    let tp = cfg.horizon.powf(p / 2.0);
    let idx = BesovIndex::new(-1.0, r, 2.0)?;
    let mut gradient_ratios = Vec::new();
    let mut besov_ratios = Vec::new();
    for ((g, f), s) in gs.iter().zip(&fs).zip(&stats) {
        g.validate(norm_grid)?;
        let mag = ScalarField::from_fn(*norm_grid, |x| {
            let mut v = [0.0; 3];
            g.gradient(side, x, &mut v[..norm_grid.dim()]);
            v.iter().map(|c| c * c).sum::<f64>().sqrt()
        })?;
        let grad = lp_norm(&mag, r)?;
        let bes = besov_norm(&f.sample(norm_grid)?, &idx).value;
        gradient_ratios.push(s.sup_moment.mean / (eta_norm * tp * grad.powf(p)));
        besov_ratios.push(s.sup_moment.mean / (eta_norm * tp * bes.powf(p)));
    }
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    Ok(ItoTrickReport {
        p,
        kappa,
        eta_norm,
        max_gradient_ratio: max(&gradient_ratios),
        max_besov_ratio: max(&besov_ratios),
        gradient_ratios,
        besov_ratios,
    })
}

/// Diagnostics of `M^f_t = f(X_t) − f(X_0) − ∫(Δ + b·∇)f(X_s) ds`.
#[derive(Debug, Clone, Serialize)]
pub struct MartingaleReport {
    pub terminal: MeanEstimate,
    pub zero_mean: bool,
    pub windows: usize,
    /// Correlations of increments over consecutive windows, across paths.
    pub lag_correlations: Vec<f64>,
    /// Bonferroni-corrected two-sided threshold for `|atanh r|·√(M−3)`.
    pub correlation_threshold: f64,
    pub uncorrelated: bool,
    pub realized_qv: MeanEstimate,
    /// `∫ 2|∇f|² ds`, the bracket of `√2 dB`-driven dynamics.
    pub predicted_qv: MeanEstimate,
    pub qv_relative_error: f64,
    pub qv_ci: (f64, f64),
    /// realized over `∫|∇f|² ds` without the diffusion factor.
    pub literal_ratio: f64,
}

struct MartingaleObserver<'a> {
    f: &'a TrigPolynomial,
    drift: &'a DriftSampler,
    side: f64,
    dt: f64,
    bounds: &'a [usize],
    m: f64,
    f_prev: f64,
    gen_prev: f64,
    grad_sq_prev: f64,
    qv: f64,
    pred: f64,
    window_start: f64,
    next: usize,
    incs: Vec<f64>,
}

impl MartingaleObserver<'_> {
    fn local(&self, x: &[f64]) -> (f64, f64, f64) {
        let d = x.len();
        let mut grad = [0.0; 3];
        let mut b = [0.0; 3];
        self.f.gradient(self.side, x, &mut grad[..d]);
        self.drift.eval(x, &mut b[..d]);
        let adv: f64 = (0..d).map(|a| b[a] * grad[a]).sum();
        let g2: f64 = grad[..d].iter().map(|v| v * v).sum();
        (self.f.eval(self.side, x), self.f.laplacian(self.side, x) + adv, g2)
    }
}

impl Observer for MartingaleObserver<'_> {
    type Output = (f64, f64, f64, Vec<f64>);
    fn observe(&mut self, step: usize, _t: f64, x: &[f64], _y: &[f64]) {
        let (fx, gen, g2) = self.local(x);
        if step > 0 {
            let dm = fx - self.f_prev - self.gen_prev * self.dt;
            self.m += dm;
            self.qv += dm * dm;
            self.pred += 2.0 * self.grad_sq_prev * self.dt;
        }
        while self.next < self.bounds.len() && self.bounds[self.next] == step {
            if self.next > 0 {
                self.incs.push(self.m - self.window_start);
            }
            self.window_start = self.m;
            self.next += 1;
        }
        self.f_prev = fx;
        self.gen_prev = gen;
        self.grad_sq_prev = g2;
    }
    fn finish(self) -> Self::Output {
        (self.m, self.qv, self.pred, self.incs)
    }
}

pub fn martingale_diagnostics(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    f: &TrigPolynomial,
    windows: usize,
) -> Result<MartingaleReport> {
    f.validate(drift.grid())?;
    let steps = cfg.steps()?;
    if windows < 2 || windows > steps {
        return Err(Error::param(format!("need 2 <= windows <= steps, got {windows}")));
    }
    let mut bounds = vec![0];
    bounds.extend(checkpoint_steps(steps, windows));
    let out = simulate_observed(cfg, drift, eta, |_| MartingaleObserver {
        f,
        drift,
        side: drift.side(),
        dt: cfg.dt,
        bounds: &bounds,
        m: 0.0,
        f_prev: 0.0,
        gen_prev: 0.0,
        grad_sq_prev: 0.0,
        qv: 0.0,
        pred: 0.0,
        window_start: 0.0,
        next: 0,
        incs: Vec::with_capacity(windows),
    })?;
    let terminal = MeanEstimate::from_samples(&out.iter().map(|o| o.0).collect::<Vec<_>>());
    let qv: Vec<f64> = out.iter().map(|o| o.1).collect();
    let pred: Vec<f64> = out.iter().map(|o| o.2).collect();
    let diff: Vec<f64> = qv.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let realized_qv = MeanEstimate::from_samples(&qv);
    let predicted_qv = MeanEstimate::from_samples(&pred);
    let d = MeanEstimate::from_samples(&diff);

    let m = out.len();
    let lag_correlations: Vec<f64> = (0..windows - 1)
        .map(|w| {
            let a: Vec<f64> = out.iter().map(|o| o.3[w]).collect();
            let b: Vec<f64> = out.iter().map(|o| o.3[w + 1]).collect();
            correlation(&a, &b)
        })
        .collect();
    let correlation_threshold = normal_quantile(1.0 - 0.01 / (2.0 * (windows - 1) as f64));
    let scale = (m.saturating_sub(3) as f64).sqrt();
    let uncorrelated = lag_correlations
        .iter()
        .all(|r| r.is_nan() || r.atanh().abs() * scale <= correlation_threshold);
    let denom = predicted_qv.mean;
    let (rel, ci) = if denom > 0.0 {
        (
            d.mean / denom,
            ((d.mean - Z95 * d.se) / denom, (d.mean + Z95 * d.se) / denom),
        )
    } else {
        (0.0, (0.0, 0.0))
    };
    Ok(MartingaleReport {
        zero_mean: terminal.within_se(0.0, 3.0) || terminal.se == 0.0 && terminal.mean.abs() < 1e-12,
        terminal,
        windows,
        lag_correlations,
        correlation_threshold,
        uncorrelated,
        literal_ratio: if denom > 0.0 { 2.0 * realized_qv.mean / denom } else { f64::NAN },
        realized_qv,
        predicted_qv,
        qv_relative_error: rel,
        qv_ci: ci,
    })
}

/// Hit frequencies of one box size, maximized over checkpoints and centres.
#[derive(Debug, Clone, Serialize)]
pub struct BoxScan {
    pub side: f64,
    pub volume: f64,
    /// `P(X_t ∈ B)/Leb(B)` at the worst checkpoint and centre.
    pub sup_ratio: f64,
    pub ratio_ci: (f64, f64),
    pub bounded: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IncompressibilityReport {
    pub eta_sup: f64,
    pub tolerance: f64,
    pub boxes: Vec<BoxScan>,
    /// Smallest KS p-value over coordinates and checkpoints (uniform η only).
    pub ks_min_p: Option<f64>,
    /// KS level after Bonferroni correction over the tests performed.
    pub ks_level: Option<f64>,
    pub uniform_ok: Option<bool>,
    pub bounded: bool,
}

fn in_box(x: &[f64], centre: &[f64], half: f64, side: f64) -> bool {
    x.iter().zip(centre).all(|(a, c)| {
        let d = (a - c).rem_euclid(side);
        d.min(side - d) <= half
    })
}

/// Scans boxes `B` of the given sides around each centre and checks
/// `sup_t P(X_t ∈ B) ≤ ‖η‖_∞·Leb(B)·(1 + tolerance)` (lower CI bound used);
/// for uniform η also runs a KS uniformity test per coordinate.
#[allow(clippy::too_many_arguments)]
pub fn incompressibility_check(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    sides: &[f64],
    centres: &[Vec<f64>],
    checkpoints: usize,
    tolerance: f64,
) -> Result<IncompressibilityReport> {
    let steps = cfg.steps()?;
    let mut at = vec![0];
    at.extend(checkpoint_steps(steps, checkpoints.max(1)));
    at.dedup();
    let runs = simulate_checkpoints(cfg, drift, eta, &at)?;
    let d = drift.dim();
    let side = drift.side();
    let eta_sup = eta.sup(drift.grid());
    let boxes: Vec<BoxScan> = sides
        .iter()
        .map(|&s| {
            let volume = s.powi(d as i32);
            let mut best = Proportion::new(0, runs.len());
            for c in centres {
                for k in 0..at.len() {
                    let hits = runs
                        .iter()
                        .filter(|r| in_box(&r.wrapped[k][..d], c, s / 2.0, side))
                        .count();
                    let p = Proportion::new(hits, runs.len());
                    if p.p > best.p {
                        best = p;
                    }
                }
            }
            let bounded = best.ci_low / volume <= eta_sup * (1.0 + tolerance);
            BoxScan {
                side: s,
                volume,
                sup_ratio: best.p / volume,
                ratio_ci: (best.ci_low / volume, best.ci_high / volume),
                bounded,
            }
        })
        .collect();
    let (ks_min_p, ks_level, uniform_ok) = if eta.is_uniform() {
        let tests = d * at.len();
        let mut min_p: f64 = 1.0;
        for k in 0..at.len() {
            for a in 0..d {
                let xs: Vec<f64> = runs.iter().map(|r| r.wrapped[k][a] / side).collect();
                min_p = min_p.min(ks_test(&xs, |u| u.clamp(0.0, 1.0)).p_value);
            }
        }
        let level = 0.01 / tests as f64;
        (Some(min_p), Some(level), Some(min_p > level))
    } else {
        (None, None, None)
    };
    Ok(IncompressibilityReport {
        bounded: boxes.iter().all(|b| b.bounded),
        eta_sup,
        tolerance,
        boxes,
        ks_min_p,
        ks_level,
        uniform_ok,
    })
}

/// Time slices `v(t_k)` of a backward-equation solution, linearly
/// interpolated in time and multilinearly in space.
#[derive(Debug, Clone)]
pub struct TimeSlices {
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
}

impl TimeSlices {
    pub fn new(times: Vec<f64>, fields: Vec<ScalarField>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::Missing("time slices are empty or mismatched".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("slice times must increase"));
        }
        Ok(Self { times, fields })
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        let tol = 1e-12 * t1.abs().max(1.0);
        self.times[0] <= t0 + tol && *self.times.last().expect("nonempty") >= t1 - tol
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len().max(2) - 1);
        if self.times.len() == 1 {
            let f = &self.fields[0];
            return multilinear(f.grid(), f.values(), x);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a = &self.fields[i - 1];
        let b = &self.fields[i];
        (1.0 - w) * multilinear(a.grid(), a.values(), x) + w * multilinear(b.grid(), b.values(), x)
    }

    pub fn sup_norm(&self) -> f64 {
        self.fields.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StoppedReport {
    pub times: Vec<f64>,
    /// `u(t∧τ, X_{t∧τ}) − u(0, X_0)` per checkpoint.
    pub means: Vec<MeanEstimate>,
    pub zero_mean: bool,
    pub stopped_fraction: f64,
    /// Paths where the bookkeeping identity on `{τ ≥ t}` failed (always 0).
    pub identity_violations: usize,
    pub sup_bound: f64,
    pub sup_violations: usize,
}

struct StoppedObserver<'a> {
    u: &'a TimeSlices,
    horizon: f64,
    k: &'a SingularSet,
    grid: &'a TorusGrid,
    delta: f64,
    at: &'a [usize],
    next: usize,
    u0: f64,
    stopped: Option<(usize, f64)>,
    out: Vec<(f64, bool)>,
    sup: f64,
}

impl StoppedObserver<'_> {
    fn u_at(&self, t: f64, x: &[f64]) -> f64 {
        self.u.eval(self.horizon - t, x)
    }
}

impl Observer for StoppedObserver<'_> {
    type Output = (Vec<(f64, bool)>, f64, bool);
    fn observe(&mut self, step: usize, t: f64, x: &[f64], _y: &[f64]) {
        if step == 0 {
            self.u0 = self.u_at(0.0, x);
        }
        if self.stopped.is_none() && self.k.distance(self.grid, t, x) <= self.delta {
            let v = self.u_at(t, x);
            self.sup = self.sup.max(v.abs());
            self.stopped = Some((step, v));
        }
        while self.next < self.at.len() && self.at[self.next] == step {
            let live = self.u_at(t, x);
            let (stopped_value, before) = match self.stopped {
                Some((s, v)) if s < step => (v, false),
                Some((_, v)) => (v, true),
                None => (live, true),
            };
            self.sup = self.sup.max(stopped_value.abs());
            // on {τ ≥ t} the stopped and live evaluations must coincide
            let ok = !before || stopped_value == live;
            self.out.push((stopped_value - self.u0, ok));
            self.next += 1;
        }
    }
    fn finish(self) -> Self::Output {
        (self.out, self.sup, self.stopped.is_some())
    }
}

/// Zero-mean test of `u(t∧τ^δ, X_{t∧τ^δ}) − u(0, X_0)` with
/// `u(t, ·) = v(T − t, ·)` built from backward-equation slices `v`.
#[allow(clippy::too_many_arguments)]
pub fn stopped_composition_test(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    k: &SingularSet,
    delta: f64,
    v: &TimeSlices,
    checkpoints: usize,
) -> Result<StoppedReport> {
    if !v.covers(0.0, cfg.horizon) {
        return Err(Error::Missing(format!(
            "backward slices do not cover [0, {}]",
            cfg.horizon
        )));
    }
    let steps = cfg.steps()?;
    let at = checkpoint_steps(steps, checkpoints.max(1));
    let grid = *drift.grid();
    let out = simulate_observed(cfg, drift, eta, |_| StoppedObserver {
        u: v,
        horizon: cfg.horizon,
        k,
        grid: &grid,
        delta,
        at: &at,
        next: 0,
        u0: 0.0,
        stopped: None,
        out: Vec::with_capacity(at.len()),
        sup: 0.0,
    })?;
    let sup_bound = v.sup_norm();
    let means: Vec<MeanEstimate> = (0..at.len())
        .map(|c| MeanEstimate::from_samples(&out.iter().map(|o| o.0[c].0).collect::<Vec<_>>()))
        .collect();
    let identity_violations = out.iter().filter(|o| o.0.iter().any(|e| !e.1)).count();
    let sup_violations = out.iter().filter(|o| o.1 > sup_bound * (1.0 + 1e-12)).count();
    let stopped = out.iter().filter(|o| o.2).count();
    let zero_mean = means.iter().all(|m| m.within_se(0.0, 3.0) || m.mean.abs() < 1e-12);
    Ok(StoppedReport {
        times: at.iter().map(|&s| s as f64 * cfg.dt).collect(),
        zero_mean,
        stopped_fraction: stopped as f64 / out.len() as f64,
        means,
        identity_violations,
        sup_bound,
        sup_violations,
    })
}
