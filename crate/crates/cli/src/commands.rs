use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::Args;
use serde::Serialize;
use serde_json::json;
use supersde::besov::{
    besov_norm as block_besov, besov_norm_vector, bony_sum, drift_product, mollification_rate_scan,
    prep_identity_scan, BesovIndex, BesovNorm, DyadicPartition, Mollifier,
};
use supersde::drift::{condition_report, drift};
use supersde::experiments::{
    execute, plan_single, run_config, set_execution, write_json, EntryStatus, ExperimentKind, RunOptions,
};
use supersde::kbe::{energy_budget, solve_with, KbeOperator, KbeOptions, Scheme};
use supersde::par::Execution;
use supersde::sde::{
    checkpoint_steps, euler_maruyama, simulate_observed, write_paths, CheckpointObserver, DriftSampler,
    InitialDensity, SimConfig,
};
use supersde::spectral::{read_field, write_field, EvalMode};
use supersde::stats::{loglog_fit, ols, LineFit, MeanEstimate};

use crate::input::{self, exponent};
use crate::DriftArgs;

pub struct Context {
    pub seed: Option<u64>,
    pub out: PathBuf,
}

impl Context {
    fn dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn csv_out<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn summary(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    write_json(dir.join(name), value)?;
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn fit_json(fit: Option<&LineFit>) -> serde_json::Value {
    match fit {
        Some(f) => json!({"slope": f.slope, "ci_low": f.ci_low, "ci_high": f.ci_high, "slope_se": f.slope_se}),
        None => json!({"slope": null, "ci_low": null, "ci_high": null}),
    }
}

pub fn drift_report(_ctx: &Context, path: &Path) -> Result<()> {
    let spec = input::drift_spec(path)?;
    let report = condition_report(&spec, spec.grid.d);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[derive(Args, Debug)]
pub struct BesovArgs {
    /// SSL1 field snapshot.
    #[arg(long, conflicts_with = "drift", required_unless_present = "drift")]
    field: Option<PathBuf>,
    /// Drift spec; the norm is taken of `b = ∇·A`.
    #[arg(long)]
    drift: Option<PathBuf>,
    #[arg(long, requires = "drift")]
    n: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s: f64,
    #[arg(long, default_value = "2", value_parser = exponent)]
    p: f64,
    #[arg(long, default_value = "inf", value_parser = exponent)]
    q: f64,
}

#[derive(Serialize)]
struct BlockRow {
    level: i32,
    norm: f64,
    weighted: f64,
    /// `log2` ratio of consecutive weighted block norms.
    slope: Option<f64>,
}

pub fn besov_norm(ctx: &Context, a: &BesovArgs) -> Result<()> {
    let idx = BesovIndex::new(a.s, a.p, a.q)?;
    let norm: BesovNorm = match (&a.field, &a.drift) {
        (Some(f), _) => block_besov(&read_field(f)?, &idx),
        (None, Some(d)) => {
            let (_, _, pot) = input::potential(&DriftArgs { drift: d.clone(), n: a.n })?;
            besov_norm_vector(&drift(&pot), &idx)
        }
        (None, None) => bail!("need --field or --drift"),
    };
    let weighted: Vec<f64> = norm
        .block_norms
        .iter()
        .enumerate()
        .map(|(i, n)| 2f64.powf((i as f64 - 1.0) * a.s) * n)
        .collect();
    let rows: Vec<BlockRow> = weighted
        .iter()
        .enumerate()
        .map(|(i, &w)| BlockRow {
            level: i as i32 - 1,
            norm: norm.block_norms[i],
            weighted: w,
            slope: (i > 0 && w > 0.0 && weighted[i - 1] > 0.0).then(|| (w / weighted[i - 1]).log2()),
        })
        .collect();
    // decay of the fully resolved weighted blocks per dyadic level
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.level < norm.first_partial_block && r.weighted > 0.0)
        .map(|r| (r.level as f64, r.weighted.log2()))
        .unzip();
    let dir = ctx.dir()?;
    csv_out(&dir.join("besov_blocks.csv"), &rows)?;
    let mut s = fit_json(ols(&xs, &ys).as_ref());
    s["value"] = json!(norm.value);
    s["top_share"] = json!(norm.top_share);
    s["truncated"] = json!(norm.truncated);
    s["j_max"] = json!(norm.j_max);
    summary(dir, "besov_norm.json", &s)
}

#[derive(Args, Debug)]
pub struct MollifyArgs {
    /// Drift spec.
    #[arg(long, required_unless_present = "prep_identity")]
    drift: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 4.0, 8.0, 16.0])]
    levels: Vec<f64>,
    /// Regularity lost in the comparison norm.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Smoothness of `b`; defaults to `−γ`.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long, value_parser = exponent)]
    p: Option<f64>,
    #[arg(long, default_value = "inf", value_parser = exponent)]
    q: f64,
    /// Scan `‖δ₀ − ρ^n‖_{B^{−α}_{1,∞}}` instead, on the grid of `--drift` or a
    /// 2-d grid of `--grid-n` points.
    #[arg(long)]
    prep_identity: bool,
    #[arg(long, default_value_t = 256)]
    grid_n: usize,
}

#[derive(Serialize)]
struct LevelRow {
    level: f64,
    norm: f64,
    slope: f64,
    truncated: bool,
}

pub fn mollify_scan(ctx: &Context, a: &MollifyArgs) -> Result<()> {
    let (levels, values, truncated) = if a.prep_identity {
        let grid = match &a.drift {
            Some(d) => input::drift_spec(d)?.grid.build()?,
            None => supersde::spectral::TorusGrid::new(2, a.grid_n, 1.0)?,
        };
        let scan = prep_identity_scan(&grid, a.alpha, &a.levels)?;
        (scan.levels, scan.values, scan.truncated)
    } else {
        let path = a.drift.as_ref().expect("clap enforces --drift");
        let (spec, _, pot) = input::potential(&DriftArgs { drift: path.clone(), n: None })?;
        let idx = BesovIndex::new(a.s.unwrap_or(-spec.gamma), a.p.unwrap_or(spec.p), a.q)?;
        let b = drift(&pot);
        let scans = b
            .components()
            .iter()
            .map(|c| mollification_rate_scan(c, &idx, a.alpha, &a.levels))
            .collect::<supersde::Result<Vec<_>>>()?;
        let values = (0..a.levels.len())
            .map(|i| scans.iter().map(|s| s.values[i]).fold(0.0, f64::max))
            .collect();
        let truncated = (0..a.levels.len()).map(|i| scans.iter().any(|s| s.truncated[i])).collect();
        (a.levels.clone(), values, truncated)
    };
    let fit = loglog_fit(&levels, &values);
    let slope = fit.map_or(f64::NAN, |f| f.slope);
    let rows: Vec<LevelRow> = levels
        .iter()
        .zip(&values)
        .zip(&truncated)
        .map(|((&level, &norm), &truncated)| LevelRow { level, norm, slope, truncated })
        .collect();
    let dir = ctx.dir()?;
    csv_out(&dir.join("mollify_scan.csv"), &rows)?;
    let mut s = fit_json(fit.as_ref());
    s["target"] = json!(-a.alpha);
    summary(dir, "mollify_scan.json", &s)
}

#[derive(Args, Debug)]
pub struct ParaproductArgs {
    #[arg(long)]
    drift: PathBuf,
    /// Test function: SSL1 file, `.json` mode list or inline JSON.
    #[arg(long)]
    u: String,
    /// Integrability of the `B^{−1}_{r,2}` norm.
    #[arg(long)]
    r: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [2.0, 4.0, 8.0, 16.0])]
    levels: Vec<f64>,
}

#[derive(Serialize)]
struct ParaRow {
    level: f64,
    norm: f64,
    drift_norm: f64,
    ratio: f64,
    bony_residual: f64,
}

pub fn paraproduct_check(ctx: &Context, a: &ParaproductArgs) -> Result<()> {
    let spec = input::drift_spec(&a.drift)?;
    let grid = spec.grid.build()?;
    let pot = spec.build_on(&grid)?;
    let u = input::field(&a.u, &grid)?;
    let mut rows = Vec::with_capacity(a.levels.len());
    for &n in &a.levels {
        let b = drift(&pot.mollify(&Mollifier::new(grid.dim(), n)?));
        let dp = drift_product(&b, &u, spec.gamma, spec.p, a.r)?;
        let b1 = b.component(0);
        let prod = b1 * &u;
        let scale = prod.l2_norm();
        let bony_residual = if scale > 0.0 { (&bony_sum(b1, &u)? - &prod).l2_norm() / scale } else { 0.0 };
        rows.push(ParaRow { level: n, norm: dp.lhs, drift_norm: dp.drift_norm, ratio: dp.ratio, bony_residual });
    }
    let levels: Vec<f64> = rows.iter().map(|r| r.level).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let dir = ctx.dir()?;
    csv_out(&dir.join("paraproduct.csv"), &rows)?;
    let mut s = fit_json(loglog_fit(&levels, &ratios).as_ref());
    s["max_ratio"] = json!(ratios.iter().cloned().fold(0.0, f64::max));
    s["max_bony_residual"] = json!(rows.iter().map(|r| r.bony_residual).fold(0.0, f64::max));
    s["j_max"] = json!(DyadicPartition::j_max(&grid));
    summary(dir, "paraproduct.json", &s)
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    drift: DriftArgs,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "T", default_value_t = 0.1)]
    horizon: f64,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    /// `uniform` or an SSL1 density snapshot.
    #[arg(long, default_value = "uniform")]
    eta: String,
    /// Store every `stride`-th position of every path as SSP1.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, default_value_t = 1)]
    refine: usize,
    #[arg(long, default_value_t = 8)]
    checkpoints: usize,
    /// Evaluate the drift spectrally instead of multilinearly.
    #[arg(long)]
    spectral: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Serialize)]
struct MsdRow {
    t: f64,
    value: f64,
    ci_low: f64,
    ci_high: f64,
    free: f64,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

pub fn simulate(ctx: &Context, a: &SimulateArgs) -> Result<()> {
    let (spec, grid, pot) = input::potential(&a.drift)?;
    let mode = if a.spectral { EvalMode::Spectral } else { EvalMode::Multilinear };
    let sampler = DriftSampler::new(&drift(&pot), a.refine, mode)?;
    let eta = match a.eta.as_str() {
        "uniform" => InitialDensity::Uniform,
        file => InitialDensity::normalized(read_field(file)?)?,
    };
    let mut cfg = SimConfig::new(a.horizon, a.dt, a.paths, ctx.seed.unwrap_or(0));
    cfg.refine = a.refine;
    cfg.interpolation = mode;
    cfg.execution = execution(a.sequential);
    let steps = cfg.steps()?;
    let mut at = vec![0];
    at.extend(checkpoint_steps(steps, a.checkpoints.max(1)));
    at.dedup();
    let cps = simulate_observed(&cfg, &sampler, &eta, |_| CheckpointObserver::new(&at))?;
    let d = grid.dim();
    let rows: Vec<MsdRow> = (1..at.len())
        .map(|k| {
            let sq: Vec<f64> = cps
                .iter()
                .map(|c| (0..d).map(|i| (c.unwrapped[k][i] - c.unwrapped[0][i]).powi(2)).sum())
                .collect();
            let m = MeanEstimate::from_samples(&sq);
            let (lo, hi) = m.ci95();
            let t = at[k] as f64 * a.dt;
            MsdRow { t, value: m.mean, ci_low: lo, ci_high: hi, free: 2.0 * d as f64 * t }
        })
        .collect();
    let dir = ctx.dir()?;
    csv_out(&dir.join("diagnostics.csv"), &rows)?;
    let mut files = vec!["summary.json", "diagnostics.csv"];
    if let Some(stride) = a.stride {
        let ens = euler_maruyama(&cfg, &sampler, &eta, stride)?;
        write_paths(&ens, dir.join("paths.ssp"))?;
        files.push("paths.ssp");
    }
    let last = rows.last().expect("at least one checkpoint");
    let s = json!({
        "seed": cfg.seed,
        "paths": a.paths,
        "steps": steps,
        "dt": a.dt,
        "T": a.horizon,
        "level": a.drift.n,
        "lipschitz": sampler.lipschitz(),
        "max_dt": sampler.max_dt(),
        "msd_T": {"value": last.value, "ci_low": last.ci_low, "ci_high": last.ci_high, "free": last.free},
        "condition": condition_report(&spec, d),
        "files": files,
    });
    summary(dir, "summary.json", &s)
}

#[derive(Args, Debug)]
pub struct KbeArgs {
    #[command(flatten)]
    drift: DriftArgs,
    /// Initial condition: SSL1 file, `.json` mode list or inline JSON.
    #[arg(long)]
    v0: String,
    #[arg(long = "T", default_value_t = 0.1)]
    horizon: f64,
    /// Time step; defaults to 90% of the transport gate.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    slices: Vec<f64>,
    /// `if-rk4`, `strang` or `semi-implicit`.
    #[arg(long, default_value = "if-rk4")]
    scheme: String,
}

/// Smallest `m` with every slice on the grid `T·k/m`.
fn slice_denominator(slices: &[f64], horizon: f64) -> Result<usize> {
    (1..=10_000)
        .find(|&m| {
            slices.iter().all(|t| {
                let k = t / horizon * m as f64;
                (k - k.round()).abs() < 1e-9 * k.max(1.0)
            })
        })
        .ok_or_else(|| anyhow::anyhow!("slices are not simple fractions of T; pass --dt"))
}

pub fn kbe(ctx: &Context, a: &KbeArgs) -> Result<()> {
    let (_, grid, pot) = input::potential(&a.drift)?;
    let v0 = input::field(&a.v0, &grid)?;
    let scheme: Scheme =
        serde_json::from_value(json!(a.scheme)).map_err(|_| anyhow::anyhow!("unknown scheme `{}`", a.scheme))?;
    let op = KbeOperator::from_potential(&pot);
    let dt = match a.dt {
        Some(dt) => dt,
        None => supersde::experiments::kbe_step(&op, a.horizon, slice_denominator(&a.slices, a.horizon)?),
    };
    let run = solve_with(&op, &v0, &KbeOptions::new(a.horizon, dt).with_slices(a.slices.clone()).with_scheme(scheme))?;
    let dir = ctx.dir()?;
    let mut files = Vec::new();
    for (k, f) in run.slices.iter().enumerate() {
        let name = format!("slice_{k:03}.ssl");
        write_field(dir.join(&name), f)?;
        files.push(name);
    }
    let budget = energy_budget(&run);
    csv_out(&dir.join("budget.csv"), &budget.rows)?;
    files.push("budget.csv".into());
    let s = json!({
        "dt": dt,
        "scheme": scheme,
        "times": run.times,
        "max_drift": run.max_drift,
        "truncation": run.truncation,
        "max_transport_defect": run.max_transport_defect,
        "max_residual_rate": budget.max_residual_rate,
        "max_principle_ok": budget.max_principle_ok,
        "l2_h1": budget.l2_h1,
        "files": files,
    });
    summary(dir, "summary.json", &s)
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// Experiment JSON (one entry of a run configuration, optionally with `grid`).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    sequential: bool,
}

fn single(ctx: &Context, kind: ExperimentKind, config: &Path, sequential: bool) -> Result<()> {
    let text = input::read_text(config)?;
    let mut entry = plan_single(kind, &text, ctx.seed)?;
    set_execution(&mut entry.plan, execution(sequential));
    let dir = ctx.dir()?;
    let files = execute(&entry, dir)?;
    for f in files {
        println!("{}", dir.join(f).display());
    }
    Ok(())
}

pub fn rate(ctx: &Context, a: &ExperimentArgs) -> Result<()> {
    let text = input::read_text(&a.config)?;
    let sweep = serde_json::from_str::<serde_json::Value>(&text).ok().is_some_and(|v| v.get("etas").is_some());
    let kind = if sweep { ExperimentKind::EtaSensitivity } else { ExperimentKind::WeakRate };
    single(ctx, kind, &a.config, a.sequential)
}

#[derive(Args, Debug)]
pub struct SingularityArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Run the analytic dimension gate instead of the hitting experiment.
    #[arg(long)]
    gate: bool,
}

pub fn singularity(ctx: &Context, a: &SingularityArgs) -> Result<()> {
    let kind = if a.gate { ExperimentKind::Gate } else { ExperimentKind::Singularity };
    single(ctx, kind, &a.exp.config, a.exp.sequential)
}

pub fn suite(ctx: &Context, a: &ExperimentArgs) -> Result<()> {
    single(ctx, ExperimentKind::Suite, &a.config, a.sequential)
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Reuse a non-empty output directory.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    sequential: bool,
}

pub fn run(ctx: &Context, a: &RunArgs) -> Result<()> {
    let opts = RunOptions { force: a.force, seed: ctx.seed, execution: execution(a.sequential) };
    let m = run_config(&a.config, &ctx.out, &opts)?;
    for e in &m.entries {
        match &e.error {
            None => println!("{:<24} ok      {:>9.2}s", e.name, e.wall_seconds),
            Some(err) => println!("{:<24} FAILED  {:>9.2}s  {err}", e.name, e.wall_seconds),
        }
    }
    println!("manifest: {}", ctx.out.join("manifest.json").display());
    if m.entries.iter().any(|e| e.status == EntryStatus::Failed) {
        std::process::exit(2);
    }
    Ok(())
}
