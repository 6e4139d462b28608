use serde::{Deserialize, Serialize};

use crate::besov::{smooth_step, Mollifier};
use crate::drift::{drift, AntisymmetricField};
use crate::kbe::KbeOperator;
use crate::sde::{DriftSampler, InitialDensity, SimConfig};
use crate::spectral::{EvalMode, ScalarField, TorusGrid, TrigPolynomial};
use crate::{Error, Result};

fn eight() -> usize {
    8
}

fn one() -> usize {
    1
}

/// Monte Carlo settings shared by the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(rename = "M")]
    pub paths: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Evenly spaced observation times in `(0, T]`.
    #[serde(default = "eight")]
    pub checkpoints: usize,
    #[serde(default = "one")]
    pub refine: usize,
    #[serde(default)]
    pub interpolation: EvalMode,
}

impl McSpec {
    pub fn new(paths: usize, dt: f64, horizon: f64) -> Self {
        Self {
            paths,
            dt,
            horizon,
            checkpoints: 8,
            refine: 1,
            interpolation: EvalMode::Multilinear,
        }
    }

    pub fn sim(&self, seed: u64) -> SimConfig {
        let mut c = SimConfig::new(self.horizon, self.dt, self.paths, seed);
        c.refine = self.refine;
        c.interpolation = self.interpolation;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::config("mc.M", "need at least two paths"));
        }
        if !(self.dt > 0.0 && self.horizon > 0.0) {
            return Err(Error::config("mc", "dt and T must be positive"));
        }
        if self.checkpoints == 0 {
            return Err(Error::config("mc.checkpoints", "need at least one checkpoint"));
        }
        let steps = self.sim(0).steps().map_err(|e| Error::config("mc.dt", e.to_string()))?;
        if steps % self.checkpoints != 0 {
            return Err(Error::config(
                "mc.checkpoints",
                format!("{} checkpoints do not divide {steps} steps", self.checkpoints),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> Result<usize> {
        self.sim(0).steps()
    }

    pub fn checkpoint_times(&self) -> Vec<f64> {
        (1..=self.checkpoints)
            .map(|k| self.horizon * k as f64 / self.checkpoints as f64)
            .collect()
    }
}

/// Initial law of `X_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaSpec {
    Uniform,
    /// Smooth bump of peak density `height` over a constant floor, with the
    /// floor chosen for unit mass.
    Bump {
        height: f64,
        center: Vec<f64>,
        radius: f64,
        /// Integrability exponent used for `‖η‖_{L^q}`; absent means `∞`.
        #[serde(default)]
        q: Option<f64>,
    },
}

impl EtaSpec {
    pub fn q(&self) -> f64 {
        match self {
            EtaSpec::Bump { q: Some(q), .. } => *q,
            _ => f64::INFINITY,
        }
    }

    pub fn label(&self) -> String {
        match self {
            EtaSpec::Uniform => "uniform".into(),
            EtaSpec::Bump { height, .. } => format!("bump{height}"),
        }
    }

    pub fn build(&self, grid: &TorusGrid) -> Result<InitialDensity> {
        match self {
            EtaSpec::Uniform => Ok(InitialDensity::Uniform),
            EtaSpec::Bump { height, center, radius, .. } => {
                if center.len() != grid.dim() || !(*radius > 0.0) {
                    return Err(Error::config("eta", "bump needs a centre in the torus and a positive radius"));
                }
                let psi = ScalarField::from_fn(*grid, |x| 1.0 - smooth_step(2.0 * grid.distance(x, center) / radius - 1.0))?;
                let vol = grid.volume();
                let mass = psi.integral() / vol;
                if !(height * mass <= 1.0 && mass < 1.0) {
                    return Err(Error::config("eta.height", format!("bump of height {height} carries more than unit mass")));
                }
                let floor = (1.0 - height * mass) / (1.0 - mass);
                let eta = psi.map(|p| (floor + (height - floor) * p) / vol)?;
                InitialDensity::normalized(eta)
            }
        }
    }
}

/// `A` mollified at level `n`.
pub fn level_potential(a: &AntisymmetricField, n: f64) -> Result<AntisymmetricField> {
    Ok(a.mollify(&Mollifier::new(a.grid().dim(), n)?))
}

pub fn sampler(a: &AntisymmetricField, mc: &McSpec) -> Result<DriftSampler> {
    DriftSampler::new(&drift(a), mc.refine, mc.interpolation)
}

/// Largest `T/steps` below the transport gate with `steps` a multiple of `multiple`.
pub fn kbe_step(op: &KbeOperator, horizon: f64, multiple: usize) -> f64 {
    let gate = 0.9 * op.max_dt();
    let mut steps = if gate.is_finite() {
        (horizon / gate).ceil() as usize
    } else {
        1
    };
    steps = steps.max(multiple).div_ceil(multiple) * multiple;
    horizon / steps as f64
}

pub fn validate_fs(fs: &[TrigPolynomial], grid: &TorusGrid) -> Result<()> {
    if fs.is_empty() {
        return Err(Error::config("fs", "need at least one test function"));
    }
    for (i, f) in fs.iter().enumerate() {
        f.validate(grid).map_err(|e| Error::config(format!("fs[{i}]"), e.to_string()))?;
    }
    Ok(())
}
