use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::par::{map_indexed, Execution};
use crate::spectral::{
    evaluate, gradient, map_modes, multilinear, upsample, EvalMode, ScalarField, TorusGrid,
    VectorField,
};
use crate::{Error, Result};

fn one() -> usize {
    1
}

/// Monte Carlo configuration for `dX = b(X)dt + √2 dB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    #[serde(rename = "M")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub interpolation: EvalMode,
    /// Spectral upsampling factor applied to the drift before interpolation.
    #[serde(default = "one")]
    pub refine: usize,
    #[serde(default)]
    pub execution: Execution,
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64, paths: usize, seed: u64) -> Self {
        Self {
            horizon,
            dt,
            paths,
            seed,
            interpolation: EvalMode::Multilinear,
            refine: 1,
            execution: Execution::default(),
        }
    }

    /// Number of steps; `T/dt` must be an integer.
    pub fn steps(&self) -> Result<usize> {
        if !(self.horizon > 0.0 && self.dt > 0.0 && self.paths > 0) {
            return Err(Error::param("need T > 0, dt > 0 and M > 0"));
        }
        let s = self.horizon / self.dt;
        let r = s.round();
        if (s - r).abs() > 1e-9 * s.max(1.0) {
            return Err(Error::param(format!("T/dt = {s} is not an integer")));
        }
        Ok(r as usize)
    }
}

/// Drift prepared for point evaluation along paths.
#[derive(Debug, Clone)]
pub struct DriftSampler {
    grid: TorusGrid,
    comps: Vec<Vec<f64>>,
    spectral: Option<VectorField>,
    lipschitz: f64,
}

impl DriftSampler {
    pub fn new(drift: &VectorField, refine: usize, mode: EvalMode) -> Result<Self> {
        if refine == 0 {
            return Err(Error::param("refine factor must be positive"));
        }
        let lipschitz = grid_lipschitz(drift);
        let fine: Vec<ScalarField> = if refine == 1 {
            drift.components().to_vec()
        } else {
            drift
                .components()
                .iter()
                .map(|c| upsample(c, refine))
                .collect::<Result<_>>()?
        };
        let grid = *fine[0].grid();
        Ok(Self {
            grid,
            comps: fine.iter().map(|c| c.values().to_vec()).collect(),
            spectral: (mode == EvalMode::Spectral).then(|| drift.clone()),
            lipschitz,
        })
    }

    pub fn zero(grid: TorusGrid) -> Self {
        Self {
            grid,
            comps: vec![vec![0.0; grid.len()]; grid.dim()],
            spectral: None,
            lipschitz: 0.0,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn side(&self) -> f64 {
        self.grid.side()
    }

    /// `max_x |∇b(x)|_F` over the grid.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Largest step accepted by the stability gate `dt ≤ 0.5/Lip`.
    pub fn max_dt(&self) -> f64 {
        if self.lipschitz == 0.0 {
            f64::INFINITY
        } else {
            0.5 / self.lipschitz
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        if let Some(f) = &self.spectral {
            for (o, c) in out.iter_mut().zip(f.components()) {
                *o = evaluate(c, x, EvalMode::Spectral).unwrap_or(f64::NAN);
            }
            return;
        }
        let g = &self.grid;
        let n = g.n();
        let inv_h = 1.0 / g.spacing();
        match g.dim() {
            2 => {
                let (i0, f0) = cell(x[0] * inv_h, n);
                let (i1, f1) = cell(x[1] * inv_h, n);
                let j0 = (i0 + 1) % n;
                let j1 = (i1 + 1) % n;
                let w = [
                    (1.0 - f0) * (1.0 - f1),
                    (1.0 - f0) * f1,
                    f0 * (1.0 - f1),
                    f0 * f1,
                ];
                let idx = [i0 * n + i1, i0 * n + j1, j0 * n + i1, j0 * n + j1];
                for (o, c) in out.iter_mut().zip(&self.comps) {
                    *o = w[0] * c[idx[0]] + w[1] * c[idx[1]] + w[2] * c[idx[2]] + w[3] * c[idx[3]];
                }
            }
            _ => {
                for (o, c) in out.iter_mut().zip(&self.comps) {
                    *o = multilinear(g, c, x);
                }
            }
        }
    }
}

#[inline]
fn cell(u: f64, n: usize) -> (usize, f64) {
    let fl = u.floor();
    let i = (fl as i64).rem_euclid(n as i64) as usize;
    (i, u - fl)
}

fn grid_lipschitz(b: &VectorField) -> f64 {
    let grads: Vec<VectorField> = b.components().iter().map(gradient).collect();
    let len = b.grid().len();
    (0..len)
        .map(|i| {
            grads
                .iter()
                .flat_map(|g| g.components().iter().map(move |c| c.values()[i].powi(2)))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Law of `X_0`: uniform, or the piecewise-constant density that takes the
/// grid value `η_i` on the cell centred at grid point `i`.
#[derive(Debug, Clone)]
pub enum InitialDensity {
    Uniform,
    Grid { eta: ScalarField, cdf: Vec<f64> },
}

impl InitialDensity {
    pub fn from_field(eta: ScalarField) -> Result<Self> {
        if eta.min() < 0.0 {
            return Err(Error::param(format!("initial density negative (min {})", eta.min())));
        }
        let mass = eta.integral();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::param(format!("initial density has mass {mass}, expected 1")));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = eta
            .values()
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self::Grid { eta, cdf })
    }

    /// Normalizes a nonnegative field to unit mass first.
    pub fn normalized(eta: ScalarField) -> Result<Self> {
        let mass = eta.integral();
        if !(mass > 0.0) {
            return Err(Error::param("initial density has no mass"));
        }
        Self::from_field(eta.scale(1.0 / mass))
    }

    /// Draws `X_0` using exactly `d + 1` uniforms from `rng`.
    pub fn sample(&self, grid: &TorusGrid, rng: &mut impl Rng, out: &mut [f64]) {
        let d = grid.dim();
        let u0: f64 = rng.random();
        let mut u = [0.0; 3];
        for v in u.iter_mut().take(d) {
            *v = rng.random();
        }
        match self {
            Self::Uniform => {
                for a in 0..d {
                    out[a] = u[a] * grid.side();
                }
            }
            Self::Grid { eta, cdf } => {
                let idx = cdf.partition_point(|&c| c <= u0).min(cdf.len() - 1);
                let g = eta.grid();
                let m = g.multi_index(idx);
                let h = g.spacing();
                for a in 0..d {
                    out[a] = g.wrap((m[a] as f64 + u[a] - 0.5) * h);
                }
            }
        }
    }

    /// `E[v(X_0)]` for `v` given by its trigonometric interpolant; exact for
    /// the piecewise-constant law.
    pub fn expectation(&self, v: &ScalarField) -> Result<f64> {
        match self {
            Self::Uniform => Ok(v.mean()),
            Self::Grid { eta, .. } => {
                eta.check_grid(v)?;
                let h = v.grid().spacing();
                let sinc = |x: f64| if x == 0.0 { 1.0 } else { x.sin() / x };
                let avg = map_modes(v, |m| {
                    (0..m.dim).map(|a| sinc(m.xi[a] * h / 2.0)).product::<f64>()
                });
                eta.inner(&avg)
            }
        }
    }

    pub fn sup(&self, grid: &TorusGrid) -> f64 {
        match self {
            Self::Uniform => 1.0 / grid.volume(),
            Self::Grid { eta, .. } => eta.max(),
        }
    }

    pub fn lp_norm(&self, grid: &TorusGrid, p: f64) -> Result<f64> {
        match self {
            Self::Uniform => {
                let c = ScalarField::constant(*grid, 1.0 / grid.volume());
                crate::spectral::lp_norm(&c, p)
            }
            Self::Grid { eta, .. } => crate::spectral::lp_norm(eta, p),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Self::Uniform)
    }
}

/// Per-path consumer of a simulated trajectory. `observe` is called for
/// `step = 0..=steps` with the wrapped and unwrapped positions.
pub trait Observer {
    type Output: Send;
    fn observe(&mut self, step: usize, t: f64, x: &[f64], unwrapped: &[f64]);
    fn finish(self) -> Self::Output;
}

/// RNG for the initial point of path `id`.
pub fn initial_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(2 * id as u64);
    r
}

/// RNG for the Brownian increments of path `id`. Shared across drifts, so
/// runs with the same seed use common random numbers.
pub fn increment_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(2 * id as u64 + 1);
    r
}

/// Euler–Maruyama over all paths, feeding each to its own observer.
/// Outputs are returned in path order.
pub fn simulate_observed<O, F>(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    make: F,
) -> Result<Vec<O::Output>>
where
    O: Observer,
    F: Fn(usize) -> O + Sync + Send,
{
    let steps = cfg.steps()?;
    if cfg.dt > drift.max_dt() {
        return Err(Error::StabilityGate {
            dt: cfg.dt,
            required: drift.max_dt(),
        });
    }
    if let InitialDensity::Grid { eta, .. } = eta {
        if eta.grid().side() != drift.side() || eta.grid().dim() != drift.dim() {
            return Err(Error::GridMismatch("initial density and drift tori differ".into()));
        }
    }
    let grid = *drift.grid();
    let d = grid.dim();
    let side = grid.side();
    let dt = cfg.dt;
    let sq = (2.0 * dt).sqrt();
    Ok(map_indexed(cfg.paths, cfg.execution, |id| {
        let mut obs = make(id);
        let mut x = [0.0; 3];
        eta.sample(&grid, &mut initial_rng(cfg.seed, id), &mut x);
        let mut y = x;
        let mut rng = increment_rng(cfg.seed, id);
        let mut b = [0.0; 3];
        obs.observe(0, 0.0, &x[..d], &y[..d]);
        for k in 1..=steps {
            drift.eval(&x[..d], &mut b[..d]);
            for a in 0..d {
                let z: f64 = StandardNormal.sample(&mut rng);
                let dx = b[a] * dt + sq * z;
                y[a] += dx;
                let w = (x[a] + dx).rem_euclid(side);
                x[a] = if w >= side { 0.0 } else { w };
            }
            obs.observe(k, k as f64 * dt, &x[..d], &y[..d]);
        }
        obs.finish()
    }))
}

/// Recorded unwrapped positions of every path at every `stride`-th step.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub dim: usize,
    pub side: f64,
    pub dt: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    pub seed: u64,
    /// `[path][time][coord]`, unwrapped.
    positions: Vec<f64>,
}

/// Upper bound on stored coordinates (2 GiB of f64).
const MAX_STORED: usize = 1 << 28;

struct Recorder {
    stride: usize,
    buf: Vec<f64>,
}

impl Observer for Recorder {
    type Output = Vec<f64>;
    fn observe(&mut self, step: usize, _t: f64, _x: &[f64], y: &[f64]) {
        if step % self.stride == 0 {
            self.buf.extend_from_slice(y);
        }
    }
    fn finish(self) -> Vec<f64> {
        self.buf
    }
}

impl PathEnsemble {
    pub fn from_parts(
        dim: usize,
        side: f64,
        dt: f64,
        stride: usize,
        seed: u64,
        n_times: usize,
        positions: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 || n_times == 0 || positions.len() % (dim * n_times) != 0 {
            return Err(Error::Format("position array does not match dimensions".into()));
        }
        let times = (0..n_times).map(|k| (k * stride) as f64 * dt).collect();
        Ok(Self {
            dim,
            side,
            dt,
            stride,
            times,
            seed,
            positions,
        })
    }

    pub fn paths(&self) -> usize {
        self.positions.len() / (self.dim * self.times.len())
    }

    /// Spacing of the recorded times.
    pub fn record_dt(&self) -> f64 {
        self.dt * self.stride as f64
    }

    /// Unwrapped positions of one path, `[time][coord]`.
    pub fn path(&self, i: usize) -> &[f64] {
        let len = self.dim * self.times.len();
        &self.positions[i * len..(i + 1) * len]
    }

    pub fn wrapped(&self, i: usize, k: usize) -> [f64; 3] {
        let p = self.path(i);
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = p[k * self.dim + a].rem_euclid(self.side);
        }
        out
    }

    pub fn raw(&self) -> &[f64] {
        &self.positions
    }
}

/// Simulates and stores every `stride`-th position of every path.
pub fn euler_maruyama(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    stride: usize,
) -> Result<PathEnsemble> {
    let steps = cfg.steps()?;
    if stride == 0 || steps % stride != 0 {
        return Err(Error::param(format!("stride {stride} must divide the step count {steps}")));
    }
    let n_times = steps / stride + 1;
    let total = cfg.paths.saturating_mul(n_times).saturating_mul(drift.dim());
    if total > MAX_STORED {
        return Err(Error::param(format!(
            "ensemble would store {total} coordinates; increase the stride or use observers"
        )));
    }
    let chunks = simulate_observed(cfg, drift, eta, |_| Recorder {
        stride,
        buf: Vec::with_capacity(n_times * drift.dim()),
    })?;
    PathEnsemble::from_parts(
        drift.dim(),
        drift.side(),
        cfg.dt,
        stride,
        cfg.seed,
        n_times,
        chunks.concat(),
    )
}

/// Wrapped and unwrapped positions at selected steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoints {
    pub wrapped: Vec<[f64; 3]>,
    pub unwrapped: Vec<[f64; 3]>,
}

/// Records positions at a sorted list of step indices.
pub struct CheckpointObserver<'a> {
    steps: &'a [usize],
    next: usize,
    out: Checkpoints,
}

impl<'a> CheckpointObserver<'a> {
    pub fn new(steps: &'a [usize]) -> Self {
        Self {
            steps,
            next: 0,
            out: Checkpoints {
                wrapped: Vec::with_capacity(steps.len()),
                unwrapped: Vec::with_capacity(steps.len()),
            },
        }
    }
}

impl Observer for CheckpointObserver<'_> {
    type Output = Checkpoints;
    fn observe(&mut self, step: usize, _t: f64, x: &[f64], y: &[f64]) {
        while self.next < self.steps.len() && self.steps[self.next] == step {
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            a[..x.len()].copy_from_slice(x);
            b[..y.len()].copy_from_slice(y);
            self.out.wrapped.push(a);
            self.out.unwrapped.push(b);
            self.next += 1;
        }
    }
    fn finish(self) -> Checkpoints {
        self.out
    }
}

/// Evenly spaced checkpoint steps `k·steps/count`, `k = 1..=count`.
pub fn checkpoint_steps(steps: usize, count: usize) -> Vec<usize> {
    (1..=count).map(|k| (k * steps) / count).collect()
}

/// Runs the ensemble and returns positions at the given steps.
pub fn simulate_checkpoints(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    steps: &[usize],
) -> Result<Vec<Checkpoints>> {
    let mut sorted = steps.to_vec();
    sorted.sort_unstable();
    if sorted != steps {
        return Err(Error::param("checkpoint steps must be sorted"));
    }
    simulate_observed(cfg, drift, eta, |_| CheckpointObserver::new(steps))
}

struct PathReducer<'a, T> {
    stride: usize,
    buf: Vec<f64>,
    reduce: &'a (dyn Fn(usize, &[f64]) -> T + Sync),
    id: usize,
}

impl<T: Send> Observer for PathReducer<'_, T> {
    type Output = T;
    fn observe(&mut self, step: usize, _t: f64, _x: &[f64], y: &[f64]) {
        if step % self.stride == 0 {
            self.buf.extend_from_slice(y);
        }
    }
    fn finish(self) -> T {
        (self.reduce)(self.id, &self.buf)
    }
}

/// Simulates each path, keeps its `stride`-subsampled unwrapped trajectory
/// only long enough to reduce it with `reduce(id, path)`.
pub fn map_paths<T: Send>(
    cfg: &SimConfig,
    drift: &DriftSampler,
    eta: &InitialDensity,
    stride: usize,
    reduce: &(dyn Fn(usize, &[f64]) -> T + Sync),
) -> Result<Vec<T>> {
    let steps = cfg.steps()?;
    if stride == 0 || steps % stride != 0 {
        return Err(Error::param(format!("stride {stride} must divide the step count {steps}")));
    }
    let cap = (steps / stride + 1) * drift.dim();
    simulate_observed(cfg, drift, eta, |id| PathReducer {
        stride,
        buf: Vec::with_capacity(cap),
        reduce,
        id,
    })
}
