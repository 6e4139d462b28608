use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{ScalarField, VectorField};
use super::grid::{Mode, TorusGrid};
use crate::error::{Error, Result};
use crate::par::pairwise_sum;

/// A Fourier multiplier `m(ξ)`.
#[derive(Clone)]
pub struct FrequencySymbol {
    symbol: Arc<dyn Fn(&Mode) -> Complex64 + Send + Sync>,
    pub description: String,
}

impl fmt::Debug for FrequencySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrequencySymbol")
            .field("description", &self.description)
            .finish()
    }
}

impl FrequencySymbol {
    pub fn new(
        description: impl Into<String>,
        symbol: impl Fn(&Mode) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        FrequencySymbol {
            symbol: Arc::new(symbol),
            description: description.into(),
        }
    }

    /// Real-valued symbol.
    pub fn real(
        description: impl Into<String>,
        symbol: impl Fn(&Mode) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(description, move |m| Complex64::new(symbol(m), 0.0))
    }

    pub fn eval(&self, mode: &Mode) -> Complex64 {
        (self.symbol)(mode)
    }

    pub fn identity() -> Self {
        Self::real("identity", |_| 1.0)
    }

    /// `-|ξ|²` with Nyquist components dropped, so that
    /// `divergence ∘ gradient` reproduces it exactly.
    pub fn laplacian() -> Self {
        Self::real("laplacian", |m| {
            let xi = m.derivative_xi();
            -xi[..m.dim].iter().map(|x| x * x).sum::<f64>()
        })
    }

    /// `(1 - Δ)^{s}` with the full `|ξ|²`.
    pub fn bessel_potential(s: f64) -> Self {
        Self::real(format!("(1-Δ)^{s}"), move |m| (1.0 + m.norm_sq()).powf(s))
    }

    /// `i ξ_axis` (Nyquist zeroed).
    pub fn partial(axis: usize) -> Self {
        Self::new(format!("∂_{axis}"), move |m| {
            Complex64::new(0.0, m.derivative_xi()[axis])
        })
    }
}

/// Multiplies every coefficient by `m(ξ)` and returns the real field.
pub fn apply_multiplier(field: &ScalarField, m: &FrequencySymbol) -> Result<ScalarField> {
    let grid = *field.grid();
    let coeffs = field.coeffs();
    let mut out = Vec::with_capacity(coeffs.len());
    for (i, c) in coeffs.iter().enumerate() {
        let mode = grid.mode(i);
        let s = m.eval(&mode);
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(Error::param(format!(
                "symbol `{}` is not finite at k = {:?}",
                m.description,
                &mode.k[..mode.dim]
            )));
        }
        out.push(c * s);
    }
    ScalarField::from_coeffs(grid, &out)
}

/// Applies a real symbol given as a plain function; internal fast path.
pub(crate) fn map_modes(field: &ScalarField, f: impl Fn(&Mode) -> f64) -> ScalarField {
    let grid = *field.grid();
    let coeffs: Vec<Complex64> = field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| c * f(&grid.mode(i)))
        .collect();
    ScalarField::from_vec_unchecked(grid, super::fft::inverse(&grid, &coeffs))
}

pub fn gradient(u: &ScalarField) -> VectorField {
    let grid = *u.grid();
    let coeffs = u.coeffs();
    let comps = (0..grid.dim())
        .map(|axis| {
            let c: Vec<Complex64> = coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * Complex64::new(0.0, grid.mode(i).derivative_xi()[axis]))
                .collect();
            ScalarField::from_vec_unchecked(grid, super::fft::inverse(&grid, &c))
        })
        .collect();
    VectorField::new(comps).expect("gradient components share the grid")
}

pub fn divergence(f: &VectorField) -> ScalarField {
    let grid = *f.grid();
    let mut acc = vec![Complex64::default(); grid.len()];
    for (axis, comp) in f.components().iter().enumerate() {
        for (i, c) in comp.coeffs().iter().enumerate() {
            acc[i] += c * Complex64::new(0.0, grid.mode(i).derivative_xi()[axis]);
        }
    }
    ScalarField::from_vec_unchecked(grid, super::fft::inverse(&grid, &acc))
}

pub fn laplacian(u: &ScalarField) -> ScalarField {
    map_modes(u, |m| {
        let xi = m.derivative_xi();
        -xi[..m.dim].iter().map(|x| x * x).sum::<f64>()
    })
}

/// Point-evaluation strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// d-linear interpolation from the enclosing cell.
    #[default]
    Multilinear,
    /// Direct Fourier-series summation, `O(N^d)` per point.
    Spectral,
}

pub fn evaluate(field: &ScalarField, x: &[f64], mode: EvalMode) -> Result<f64> {
    let grid = field.grid();
    if x.len() < grid.dim() || x[..grid.dim()].iter().any(|v| !v.is_finite()) {
        return Err(Error::param(format!("cannot evaluate at {x:?}")));
    }
    Ok(match mode {
        EvalMode::Multilinear => multilinear(grid, field.values(), x),
        EvalMode::Spectral => spectral_eval(field, x),
    })
}

pub(crate) fn multilinear(grid: &TorusGrid, values: &[f64], x: &[f64]) -> f64 {
    let n = grid.n();
    let inv_h = 1.0 / grid.spacing();
    let dim = grid.dim();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..dim {
        let u = grid.wrap(x[a]) * inv_h;
        let i = u.floor();
        frac[a] = u - i;
        base[a] = (i as usize) % n;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << dim) {
        let mut w = 1.0;
        let mut idx = 0usize;
        for a in 0..dim {
            let bit = (corner >> (dim - 1 - a)) & 1;
            let i = if bit == 1 { (base[a] + 1) % n } else { base[a] };
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            idx = idx * n + i;
        }
        if w != 0.0 {
            acc += w * values[idx];
        }
    }
    acc
}

fn spectral_eval(field: &ScalarField, x: &[f64]) -> f64 {
    let grid = field.grid();
    let dim = grid.dim();
    let mut acc = 0.0;
    for (i, c) in field.coeffs().iter().enumerate() {
        let m = grid.mode(i);
        let phase: f64 = (0..dim).map(|a| m.xi[a] * x[a]).sum();
        acc += c.re * phase.cos() - c.im * phase.sin();
    }
    acc
}

/// `(Σ |u|^p h^d)^{1/p}`; `p = ∞` gives the max.
pub fn lp_norm(field: &ScalarField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::param(format!("L^p exponent {p} must be >= 1")));
    }
    if p.is_infinite() {
        return Ok(field.max_abs());
    }
    let vals = field.values();
    let scale = field.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    // Normalize first so large p does not overflow.
    let terms: Vec<f64> = vals.iter().map(|v| (v.abs() / scale).powf(p)).collect();
    Ok(scale * (pairwise_sum(&terms) * field.grid().cell_volume()).powf(1.0 / p))
}

/// `‖u‖_{H¹} = (L^d Σ (1 + |ξ|²)|c_k|²)^{1/2}`.
pub fn h1_norm(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let s: Vec<f64> = u
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| (1.0 + grid.mode(i).norm_sq()) * c.norm_sqr())
        .collect();
    (pairwise_sum(&s) * grid.volume()).sqrt()
}

/// Keeps modes with `max_i |k_i| <= kmax`.
pub fn band_limit(u: &ScalarField, kmax: i32) -> ScalarField {
    map_modes(u, |m| if m.max_abs_k() <= kmax { 1.0 } else { 0.0 })
}

/// Two-thirds rule: keeps `|k_i| < N/3` on every axis.
pub fn dealias(u: &ScalarField) -> ScalarField {
    band_limit(u, dealias_cutoff(u.grid()))
}

pub(crate) fn dealias_cutoff(grid: &TorusGrid) -> i32 {
    // largest k with 3k < N
    ((grid.n() - 1) / 3) as i32
}

/// Spectral zero-padding onto a grid `factor` times finer.
pub fn upsample(u: &ScalarField, factor: usize) -> Result<ScalarField> {
    if factor == 1 {
        return Ok(u.clone());
    }
    let coarse = *u.grid();
    let fine = coarse.refined(factor)?;
    let mut coeffs = vec![Complex64::default(); fine.len()];
    let nc = coarse.n() as i32;
    let nf = fine.n() as i32;
    for (i, c) in u.coeffs().iter().enumerate() {
        let m = coarse.mode(i);
        if m.nyquist[..m.dim].iter().any(|&b| b) {
            // Split the Nyquist coefficient symmetrically would need conjugate
            // bookkeeping; dropping it keeps the result real and exact on
            // band-limited input.
            continue;
        }
        let mut idx = 0usize;
        for a in 0..m.dim {
            let k = m.k[a];
            let j = if k >= 0 { k } else { nf + k };
            idx = idx * fine.n() + j as usize;
        }
        debug_assert!(m.k[..m.dim].iter().all(|k| k.abs() < nc / 2 + 1));
        coeffs[idx] = *c;
    }
    ScalarField::from_coeffs(fine, &coeffs)
}
