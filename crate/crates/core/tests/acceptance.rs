//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails for a reason not listed as known.
//! Known failures are still printed as FAIL, with the reason attached.
//!
//! `SUPERSDE_CRITERIA=3,5` restricts the run to the listed criteria.

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use supersde::besov::{
    bony_sum, lp_blocks, mollification_rate_scan, prep_identity_scan, BesovIndex, DyadicPartition,
};
use supersde::drift::{drift, synth_random_besov, AntisymmetricField, SingularSet};
use supersde::experiments::{
    energy_solution_suite, ito_across_levels, singularity_rate, weak_rate, HittingExperiment, RateExperiment,
    SingularityReport, SuiteConfig,
};
use supersde::kbe::{energy_budget, expectation_oracle, identity_check, solve_kbe, KbeOperator, KbeOptions};
use supersde::par::Execution;
use supersde::sde::{
    checkpoint_steps, euler_maruyama, first_entry, holder_norm, holder_tail, map_paths, moment_regression,
    occupation_time, simulate_checkpoints, DriftSampler, InitialDensity, SimConfig,
};
use supersde::spectral::{
    band_limit, divergence, forward, inverse, EvalMode, ScalarField, TorusGrid, TrigMode, TrigPolynomial,
};
use supersde::stats::{loglog_fit, median, quantile, MeanEstimate};

struct Item {
    ok: bool,
    text: String,
    known: Option<&'static str>,
}

type Check = Result<Vec<Item>, String>;

fn item(ok: bool, text: impl Into<String>) -> Item {
    Item { ok, text: text.into(), known: None }
}

/// A sub-check that is expected to fail in this setup, with the reason.
fn known(ok: bool, text: impl Into<String>, reason: &'static str) -> Item {
    Item { known: Some(reason), ..item(ok, text) }
}

fn random_field(grid: TorusGrid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::new(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn from<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T, String> {
    serde_json::from_value(v).map_err(|e| e.to_string())
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Direct DFT with the crate's normalization, `c_k = N^{-d} Σ u e^{-iξ·x}`.
fn brute_force_dft(f: &ScalarField) -> Vec<Complex64> {
    let g = f.grid();
    (0..g.len())
        .map(|ki| {
            let m = g.mode(ki);
            let mut acc = Complex64::default();
            for xi in 0..g.len() {
                let x = g.point(xi);
                let phase: f64 = (0..g.dim()).map(|a| m.xi[a] * x[a]).sum();
                acc += f.values()[xi] * Complex64::from_polar(1.0, -phase);
            }
            acc / g.len() as f64
        })
        .collect()
}

fn spectral_exactness() -> Check {
    let (mut round, mut parseval, mut div, mut dft) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for dim in [2, 3] {
        for n in [8, 16, 32] {
            for seed in 0..4u64 {
                let g = TorusGrid::new(dim, n, 1.0 + seed as f64).map_err(err)?;
                let u = random_field(g, 100 * seed + n as u64 + dim as u64);
                let c = forward(&g, u.values());
                let back = inverse(&g, &c);
                let norm = u.values().iter().map(|v| v * v).sum::<f64>();
                let diff = u.values().iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                round = round.max((diff / norm).sqrt());
                let phys = norm * g.cell_volume();
                let spec = c.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.volume();
                parseval = parseval.max((phys - spec).abs() / phys);

                let a = match dim {
                    2 => AntisymmetricField::stream(band_limit(&u, n as i32 / 3)).map_err(err)?,
                    _ => AntisymmetricField::potential([0, 1, 2].map(|i| band_limit(&random_field(g, seed + 10 * i), n as i32 / 3)))
                        .map_err(err)?,
                };
                let b = drift(&a);
                div = div.max(divergence(&b).max_abs() / b.max_magnitude());
                if n == 8 && seed == 0 {
                    let oracle = brute_force_dft(&u);
                    dft = dft.max(c.iter().zip(&oracle).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
                }
            }
        }
    }
    Ok(vec![
        item(round <= 1e-12, format!("round-trip {round:.1e}")),
        item(parseval <= 1e-10, format!("Parseval {parseval:.1e}")),
        item(div <= 1e-8, format!("div b {div:.1e}")),
        item(dft <= 1e-12, format!("direct DFT {dft:.1e}")),
    ])
}

fn littlewood_paley() -> Check {
    let mut unity = 0.0f64;
    let mut recon = 0.0f64;
    for (dim, n, side) in [(2, 16, 1.0), (2, 64, TAU), (3, 16, 1.0), (3, 32, 3.0)] {
        let g = TorusGrid::new(dim, n, side).map_err(err)?;
        let jm = DyadicPartition::j_max(&g);
        for m in g.modes() {
            let s: f64 = (-1..=jm).map(|j| DyadicPartition::phi(j, m.norm())).sum();
            unity = unity.max((s - 1.0).abs());
        }
        let u = random_field(g, n as u64);
        let sum = lp_blocks(&u).iter().fold(ScalarField::zeros(g), |a, b| &a + b);
        recon = recon.max((&sum - &u).max_abs());
    }
    let mut bony = 0.0f64;
    for pair in 0..100u64 {
        let n = [16usize, 32, 64][(pair % 3) as usize];
        let g = TorusGrid::new(2, n, 1.0).map_err(err)?;
        let b = band_limit(&random_field(g, 2 * pair), n as i32 / 4);
        let v = band_limit(&random_field(g, 2 * pair + 1), n as i32 / 4);
        let product = b.zip_with(&v, |x, y| x * y).map_err(err)?;
        bony = bony.max((&bony_sum(&b, &v).map_err(err)? - &product).max_abs());
    }
    Ok(vec![
        item(unity <= 1e-12, format!("|Σφ_j − 1| {unity:.1e}")),
        item(recon <= 1e-10, format!("block reconstruction {recon:.1e}")),
        item(bony <= 1e-8, format!("Bony completeness {bony:.1e} over 100 pairs")),
    ])
}

fn mollification_rate() -> Check {
    let levels = [4.0, 8.0, 16.0, 32.0];
    let g = TorusGrid::new(2, 256, 1.0).map_err(err)?;
    let idx = BesovIndex::new(0.0, 2.0, f64::INFINITY).map_err(err)?;
    let synth = synth_random_besov(&g, &idx, 3, 1.0).map_err(err)?;
    let u = synth.field.components()[0].clone();
    let scan = mollification_rate_scan(&u, &idx, 0.5, &levels).map_err(err)?;
    let prep = prep_identity_scan(&TorusGrid::new(2, 256, 4.0).map_err(err)?, 0.5, &levels).map_err(err)?;
    Ok(vec![
        item(scan.fit.slope <= -0.35, format!("scan slope {:.3}", scan.fit.slope)),
        item((prep.fit.slope + 0.5).abs() <= 0.15, format!("δ₀ − ρ^n slope {:.3}", prep.fit.slope)),
    ])
}

/// Real matrix of `x ↦ F^{-1} diag(s) F x` on a 2-d grid of side 1.
fn fourier_operator(n: usize, symbol: impl Fn([f64; 2]) -> Complex64) -> DMatrix<f64> {
    let len = n * n;
    let kk = |i: usize| if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
    let modes: Vec<[f64; 2]> = (0..len).map(|k| [kk(k / n), kk(k % n)]).collect();
    let point = |x: usize| [(x / n) as f64 / n as f64, (x % n) as f64 / n as f64];
    DMatrix::from_fn(len, len, |y, x| {
        let (py, px) = (point(y), point(x));
        let mut acc = Complex64::default();
        for k in &modes {
            let ph = TAU * (k[0] * (py[0] - px[0]) + k[1] * (py[1] - px[1]));
            acc += symbol([TAU * k[0], TAU * k[1]]) * Complex64::from_polar(1.0, ph);
        }
        acc.re / len as f64
    })
}

fn kbe_solver() -> Check {
    let mut out = Vec::new();

    // heat mode
    let g = TorusGrid::new(2, 16, 1.0).map_err(err)?;
    let v0 = TrigPolynomial::single(&[2, 1], 1.0, 0.4).sample(&g).map_err(err)?;
    let run = solve_kbe(&AntisymmetricField::zeros(g), &v0, &KbeOptions::new(0.01, 0.001)).map_err(err)?;
    let expect = v0.scale((-TAU * TAU * 5.0 * 0.01).exp());
    let heat = (run.last() - &expect).max_abs();
    out.push(item(heat <= 1e-8, format!("heat mode {heat:.1e}")));

    // dense generator exponential at N = 16
    let pot = ScalarField::from_fn(g, |x| {
        0.3 * ((TAU * x[0]).sin() * (TAU * x[1]).cos() + 0.5 * (TAU * (x[0] - x[1])).cos())
    })
    .map_err(err)?;
    let cut = 5.0 * TAU;
    let mask = |xi: [f64; 2]| if xi[0].abs() <= cut + 1e-9 && xi[1].abs() <= cut + 1e-9 { 1.0 } else { 0.0 };
    let proj = fourier_operator(16, |xi| Complex64::new(mask(xi), 0.0));
    let d0 = fourier_operator(16, |xi| Complex64::new(0.0, mask(xi) * xi[0]));
    let d1 = fourier_operator(16, |xi| Complex64::new(0.0, mask(xi) * xi[1]));
    let lap = fourier_operator(16, |xi| Complex64::new(-mask(xi) * (xi[0] * xi[0] + xi[1] * xi[1]), 0.0));
    let a = DVector::from_vec(pot.values().to_vec());
    let b0 = &proj * (&d1 * &a);
    let b1 = -(&proj * (&d0 * &a));
    let adv = DMatrix::from_diagonal(&b0) * &d0 + DMatrix::from_diagonal(&b1) * &d1;
    let generator = &lap + &proj * adv * &proj;
    let f = ScalarField::from_fn(g, |x| (TAU * x[0]).cos() + 0.5 * (TAU * (x[0] + 2.0 * x[1])).sin()).map_err(err)?;
    let exact = (generator * 0.1).exp() * DVector::from_vec(f.values().to_vec());
    let run = solve_kbe(&AntisymmetricField::Stream(pot.clone()), &f, &KbeOptions::new(0.1, 1e-3)).map_err(err)?;
    let dense = max_diff(run.last().values(), exact.as_slice());
    out.push(item(dense <= 1e-6, format!("dense oracle {dense:.1e}")));

    // dissipation identity with a transport term
    let g64 = TorusGrid::new(2, 64, 1.0).map_err(err)?;
    let pot64 = ScalarField::from_fn(g64, |x| 0.5 * ((TAU * x[0]).sin() * (TAU * x[1]).cos() + 0.5 * (TAU * (x[0] - x[1])).cos()))
        .map_err(err)?;
    let v0 = ScalarField::from_fn(g64, |x| (TAU * x[0]).cos() * (2.0 * TAU * x[1]).sin() + 0.3 * (TAU * x[1]).cos()).map_err(err)?;
    let run = solve_kbe(&AntisymmetricField::Stream(pot64), &v0, &KbeOptions::new(0.05, 5e-5)).map_err(err)?;
    let budget = energy_budget(&run);
    out.push(item(budget.max_residual_rate <= 1e-6, format!("dissipation residual {:.1e}/unit time", budget.max_residual_rate)));

    // antisymmetry identity on random band-limited data
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut poly = || {
        let modes = (0..12)
            .map(|_| TrigMode {
                k: vec![rng.random_range(-20..=20), rng.random_range(-20..=20)],
                amplitude: rng.random_range(-1.0..1.0),
                phase: rng.random_range(0.0..TAU),
            })
            .collect();
        TrigPolynomial { constant: 0.0, modes }.sample(&g64)
    };
    let a = AntisymmetricField::Stream(poly().map_err(err)?);
    let identity = identity_check(&a, &poly().map_err(err)?).map_err(err)?.max();
    out.push(item(identity <= 1e-8, format!("identity {identity:.1e}")));
    Ok(out)
}

fn bump(side: f64, height: f64, radius: f64) -> serde_json::Value {
    json!({"kind": "bump", "height": height, "center": [side / 2.0, side / 2.0], "radius": radius})
}

fn mc_vs_kbe() -> Check {
    let g = TorusGrid::new(2, 32, TAU).map_err(err)?;
    let stream: TrigPolynomial = from(json!({"modes": [
        {"k": [1, 0], "amplitude": 0.4}, {"k": [1, 1], "amplitude": 0.3, "phase": 0.5}, {"k": [0, 2], "amplitude": 0.2}
    ]}))?;
    let f: TrigPolynomial = from(json!({"modes": [
        {"k": [1, 0], "amplitude": 1.0}, {"k": [0, 1], "amplitude": 1.0}, {"k": [1, 1], "amplitude": 0.5, "phase": 1.0}
    ]}))?;
    let pot = AntisymmetricField::Stream(stream.sample(&g).map_err(err)?);
    let eta = from::<supersde::experiments::EtaSpec>(bump(TAU, 5.0, 1.5))?.build(&g).map_err(err)?;
    let (horizon, dt, checkpoints) = (1.0, 1e-3, 8);
    let times: Vec<f64> = (1..=checkpoints).map(|i| horizon * i as f64 / checkpoints as f64).collect();

    let op = KbeOperator::from_potential(&pot);
    let kbe_dt = supersde::experiments::kbe_step(&op, horizon, checkpoints);
    let run = solve_kbe(&pot, &f.sample(&g).map_err(err)?, &KbeOptions::new(horizon, kbe_dt).with_slices(times.clone()))
        .map_err(err)?;

    let sampler = DriftSampler::new(&drift(&pot), 4, EvalMode::Multilinear).map_err(err)?;
    let cfg = SimConfig::new(horizon, dt, 100_000, 5);
    let steps = checkpoint_steps(cfg.steps().map_err(err)?, checkpoints);
    let paths = simulate_checkpoints(&cfg, &sampler, &eta, &steps).map_err(err)?;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    let mut ok = true;
    for (c, &t) in times.iter().enumerate() {
        let vals: Vec<f64> = paths.iter().map(|p| f.eval(TAU, &p.wrapped[c][..2])).collect();
        let est = MeanEstimate::from_samples(&vals);
        let oracle = expectation_oracle(&run, &eta, t).map_err(err)?;
        let gap = (est.mean - oracle).abs();
        let allowed = 3.0 * est.se + 2e-3;
        ok &= gap <= allowed;
        if gap / allowed > worst.0 / worst.1.max(1e-300) || worst.1 == 0.0 {
            worst = (gap, allowed, t);
        }
    }
    Ok(vec![item(
        ok,
        format!("worst |MC − ⟨η,v⟩| {:.2e} vs 3SE+2e-3 = {:.2e} at t = {}", worst.0, worst.1, worst.2),
    )])
}

fn energy_diagnostics() -> Check {
    let cfg: SuiteConfig = from(json!({
        "drift": {"kind": "random_besov", "seed": 7, "gamma": 0.2, "p": 8, "amplitude": 1.0,
                  "grid": {"d": 2, "N": 64, "L": TAU}},
        "level": 8,
        "mc": {"M": 10000, "dt": 0.001, "T": 0.5, "checkpoints": 4},
        "f": {"modes": [{"k": [1, 0], "amplitude": 1.0}, {"k": [0, 1], "amplitude": 0.5, "phase": 0.3}]},
        "gs": [{"modes": [{"k": [1, 1], "amplitude": 1.0}]}, {"modes": [{"k": [2, 0], "amplitude": 1.0}]}],
        "seed": 11
    }))?;
    let r = energy_solution_suite(&cfg).map_err(err)?;
    let ito = ito_across_levels(&cfg, &[8.0, 32.0]).map_err(err)?;
    let m = &r.martingale;
    let inc = &r.incompressibility;
    Ok(vec![
        item(
            inc.uniform_ok == Some(true),
            format!("KS min p {:.3} vs level {:.1e}", inc.ks_min_p.unwrap_or(f64::NAN), inc.ks_level.unwrap_or(f64::NAN)),
        ),
        item(m.zero_mean, format!("martingale mean {:.1e} ± {:.1e}", m.terminal.mean, m.terminal.se)),
        item(m.qv_relative_error.abs() <= 0.05, format!("QV relative error {:+.3}", m.qv_relative_error)),
        item(ito.spread <= 2.0, format!("Itô ratio spread {:.2} over n ∈ {{8, 32}}", ito.spread)),
    ])
}

fn weak_rate_check() -> Check {
    let exp: RateExperiment = from(json!({
        "drift": {"kind": "random_besov", "seed": 7, "gamma": 0.2, "p": 8, "amplitude": 32.0,
                  "grid": {"d": 2, "N": 256, "L": TAU}},
        "levels": [2, 4, 8, 16],
        "fs": [{"modes": [{"k": [1, 0], "amplitude": 1}, {"k": [0, 1], "amplitude": 1}]}],
        "eta": bump(TAU, 5.0, 1.5),
        "mc": {"M": 100000, "dt": 0.00003125, "T": 0.1, "checkpoints": 8},
        "oracle": {"mode": "kbe", "n_ref": 128}
    }))?;
    let r = weak_rate(&exp).map_err(err)?;
    let informative: Vec<_> = r.levels.iter().filter(|l| l.informative).collect();
    let decreasing = informative.len() >= 2 && informative.windows(2).all(|w| w[1].error < w[0].error);
    let errors: Vec<String> = r.levels.iter().map(|l| format!("{:.4}", l.error)).collect();
    let fit = r.fit.as_ref().ok_or("no slope fit")?;
    let slope = -fit.slope;
    Ok(vec![
        item(decreasing, format!("errors [{}], floor {:.4}, {} informative", errors.join(", "), r.noise_floor, informative.len())),
        item(slope >= 0.3, format!("β̂ {slope:.3}")),
        item(fit.ci_width() <= 0.2, format!("CI width {:.3}", fit.ci_width())),
    ])
}

fn vortex_drift() -> serde_json::Value {
    json!({"kind": "vortex", "lambda": 0.3, "center": [0.0, 0.0], "cutoff_radius": 0.25,
           "gamma": 0.0, "p": 4, "grid": {"d": 2, "N": 256, "L": 1.0},
           "K": [{"kind": "point", "center": [0.0, 0.0]}]})
}

fn singularity_report() -> &'static Result<SingularityReport, String> {
    static REPORT: OnceLock<Result<SingularityReport, String>> = OnceLock::new();
    REPORT.get_or_init(|| {
        let exp: HittingExperiment = from(json!({
            "drift": vortex_drift(),
            "eps": [0.05, 0.1, 0.2],
            "L": [0.25, 0.5, 1, 2, 4, 8, 16],
            "level": 8,
            "n_ref": 32,
            "delta": 1.0,
            "fs": [{"modes": [{"k": [1, 0], "amplitude": 1}, {"k": [0, 1], "amplitude": 1}]}],
            "mc": {"M": 100000, "dt": 0.00004, "T": 0.05, "checkpoints": 1},
            "seed": 99
        }))?;
        singularity_rate(&exp).map_err(err)
    })
}

fn scalings() -> Check {
    let mut out = Vec::new();
    let zero = DriftSampler::zero(TorusGrid::new(2, 16, 1.0).map_err(err)?);
    let cfg = SimConfig::new(0.256, 0.001, 10_000, 13);
    let ens = euler_maruyama(&cfg, &zero, &InitialDensity::Uniform, 1).map_err(err)?;
    let reg = moment_regression(&ens, 4.0, 6).ok_or("moment regression failed")?;
    out.push(item((reg.fit.slope - 2.0).abs() <= 0.2, format!("moment slope {:.3}", reg.fit.slope)));

    let norms: Vec<f64> = (0..ens.paths()).map(|i| holder_norm(ens.path(i), 2, cfg.dt, 0.25)).collect();
    let levels: Vec<f64> = [0.5, 0.75, 0.9, 0.975].iter().map(|&q| quantile(&norms, q)).collect();
    let tail = holder_tail(&norms, &levels);
    let slope = tail.fit.map_or(f64::NAN, |f| f.slope);
    out.push(item(slope <= -2.0, format!("Hölder tail slope {slope:.2}")));

    // occupation of B_2ε(K) on the paths that enter B_ε(K), vortex drift
    let spec: supersde::drift::DriftSpec = from(vortex_drift())?;
    let grid = spec.grid.build().map_err(err)?;
    let a = supersde::experiments::level_potential(&spec.build_on(&grid).map_err(err)?, 32.0).map_err(err)?;
    let sampler = DriftSampler::new(&drift(&a), 1, EvalMode::Multilinear).map_err(err)?;
    let k = SingularSet::point(&[0.0, 0.0]);
    let eps = [0.05, 0.1, 0.2];
    let cfg = SimConfig::new(0.5, 4e-5, 4000, 21);
    let per_path = map_paths(&cfg, &sampler, &InitialDensity::Uniform, 1, &|_, path| {
        eps.map(|e| first_entry(path, cfg.dt, &grid, &k, e).tau_index.map(|_| occupation_time(path, cfg.dt, &grid, &k, 2.0 * e)))
    })
    .map_err(err)?;
    let medians: Vec<f64> = (0..eps.len())
        .map(|i| median(&per_path.iter().filter_map(|p| p[i]).collect::<Vec<_>>()))
        .collect();
    let exponent = loglog_fit(&eps, &medians).map_or(f64::NAN, |f| f.slope);
    // Brownian-scale Hölder exponent α → 1/2
    let target = 2.0;
    out.push(item(
        (exponent - target).abs() <= 0.25 * target,
        format!("occupation exponent {exponent:.2} (target {target})"),
    ));
    Ok(out)
}

fn singularity() -> Check {
    let r = singularity_report().as_ref().map_err(Clone::clone)?;
    let lo = &r.rows[0];
    let hi = &r.rows[r.rows.len() - 1];
    let decreasing = r.rows.windows(2).all(|w| w[0].hit_reference.p < w[1].hit_reference.p);
    let argmins: Vec<String> = r.rows.iter().map(|row| format!("{}/{}", row.argmin, row.l_min_cell)).collect();
    Ok(vec![
        item(
            decreasing && r.separated,
            format!(
                "P(τ<T) {:.4} [{:.4}, {:.4}] .. {:.4} [{:.4}, {:.4}]",
                lo.hit_reference.p, lo.hit_reference.ci_low, lo.hit_reference.ci_high, hi.hit_reference.p,
                hi.hit_reference.ci_low, hi.hit_reference.ci_high
            ),
        ),
        item(r.envelope_ok, "envelope ≥ measured error at every ε".to_string()),
        known(
            r.argmin_ok,
            format!("argmin/L_min cells {}", argmins.join(" ")),
            "a point singular set has ε-neighborhoods of measure ε², far above the ε^{2p/(p−2)+δ} scaling L_min assumes",
        ),
    ])
}

fn determinism() -> Check {
    let exp = |execution: &str| -> Result<RateExperiment, String> {
        from(json!({
            "drift": {"kind": "random_besov", "seed": 7, "gamma": 0.2, "p": 8, "grid": {"d": 2, "N": 32, "L": 1.0}},
            "levels": [2, 4, 8, 16],
            "fs": [{"modes": [{"k": [1, 0], "amplitude": 1}]}],
            "mc": {"M": 3000, "dt": 0.000125, "T": 0.02, "checkpoints": 2},
            "oracle": {"mode": "self-difference"},
            "seed": 5,
            "execution": execution
        }))
    };
    let report = |e: &RateExperiment| -> Result<String, String> { serde_json::to_string(&weak_rate(e).map_err(err)?).map_err(err) };
    let pool = |threads: usize| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let seq = report(&exp("sequential")?)?;
    let par = exp("parallel")?;
    let one = pool(1).install(|| report(&par))?;
    let three = pool(3).install(|| report(&par))?;

    let zero = DriftSampler::zero(TorusGrid::new(2, 16, 1.0).map_err(err)?);
    let paths = |execution: Execution| {
        let mut cfg = SimConfig::new(0.05, 0.001, 500, 8);
        cfg.execution = execution;
        euler_maruyama(&cfg, &zero, &InitialDensity::Uniform, 5).map(|e| e.raw().iter().map(|x| x.to_bits()).collect::<Vec<_>>())
    };
    let p_seq = paths(Execution::Sequential).map_err(err)?;
    let p_par = pool(4).install(|| paths(Execution::Parallel)).map_err(err)?;
    Ok(vec![
        item(seq == one && one == three, "rate report identical across execution modes and 1/3 threads"),
        item(p_seq == p_par, "path ensemble bit-identical sequential vs 4 threads"),
    ])
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Check); 10] = [
        (1, "spectral exactness", spectral_exactness),
        (2, "Littlewood–Paley partition", littlewood_paley),
        (3, "mollification rate", mollification_rate),
        (4, "KBE solver", kbe_solver),
        (5, "MC vs KBE oracle", mc_vs_kbe),
        (6, "energy-solution diagnostics", energy_diagnostics),
        (7, "weak rate", weak_rate_check),
        (8, "Hölder/occupation scalings", scalings),
        (9, "singularity experiment", singularity),
        (10, "determinism", determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("SUPERSDE_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        let (pass, expected, detail) = match result {
            Ok(items) => (
                items.iter().all(|i| i.ok),
                items.iter().all(|i| i.ok || i.known.is_some()),
                items
                    .iter()
                    .map(|i| match (i.ok, i.known) {
                        (true, _) => i.text.clone(),
                        (false, None) => format!("{} ✗", i.text),
                        (false, Some(why)) => format!("{} ✗ known: {why}", i.text),
                    })
                    .collect::<Vec<_>>()
                    .join("; "),
            ),
            Err(e) => (false, false, format!("error: {e}")),
        };
        if !expected {
            failed += 1;
        }
        let verdict = match (pass, expected) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            _ => "FAIL",
        };
        println!("criterion {id:>2} {name}: {verdict} ({detail}) [{secs:.1} s]");
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
