use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::AntisymmetricField;
use crate::besov::{besov_norm, besov_norm_vector, smooth_step, BesovIndex, BesovNorm};
use crate::spectral::{lp_norm, ScalarField, TorusGrid, VectorField};
use crate::{Error, Result};

/// Top-block share above which a synthesized norm is flagged as unresolved.
const SYNTH_SHARE_LIMIT: f64 = 0.10;

/// A synthesized potential with its measured norm.
#[derive(Debug, Clone)]
pub struct SynthResult {
    pub field: AntisymmetricField,
    pub norm: BesovNorm,
    /// Set when the partially resolved blocks carry more than 10% of the norm.
    pub flagged: bool,
}

/// Seed of the Gaussian draw for integer mode `k` of component `comp`, so
/// that a mode keeps its coefficient when the grid is refined.
fn mode_seed(seed: u64, comp: usize, k: [i32; 3]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [comp as i64, k[0] as i64, k[1] as i64, k[2] as i64] {
        h = (h ^ v as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// Canonical representative of the pair `{k, −k}`: the lexicographically
/// positive one.
fn is_positive(k: [i32; 3]) -> bool {
    for v in k {
        if v != 0 {
            return v > 0;
        }
    }
    false
}

fn gaussian_component(grid: &TorusGrid, s: f64, seed: u64, comp: usize, amplitude: f64) -> ScalarField {
    let d = grid.dim() as f64;
    let coeffs: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let m = grid.mode(i);
            if m.is_zero() || m.nyquist.iter().any(|&b| b) {
                return Complex64::default();
            }
            let sigma = amplitude * (1.0 + m.k_norm()).powf(-(s + d / 2.0));
            let (rep, sign) = if is_positive(m.k) {
                (m.k, 1.0)
            } else {
                ([-m.k[0], -m.k[1], -m.k[2]], -1.0)
            };
            let mut rng = ChaCha8Rng::seed_from_u64(mode_seed(seed, comp, rep));
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, sign * im) * (sigma / 2f64.sqrt())
        })
        .collect();
    ScalarField::from_coeffs(*grid, &coeffs).expect("finite synthesis")
}

/// Gaussian potential with independent Fourier coefficients of standard
/// deviation `amplitude·(1+|k|)^{−(s+d/2)}`, zero mean mode and no Nyquist
/// content. Each mode's draw depends only on `(seed, k)`.
pub fn synth_random_besov(
    grid: &TorusGrid,
    target: &BesovIndex,
    seed: u64,
    amplitude: f64,
) -> Result<SynthResult> {
    if !target.q.is_infinite() {
        return Err(Error::param("random Besov synthesis targets q = inf"));
    }
    let field = match grid.dim() {
        2 => AntisymmetricField::stream(gaussian_component(grid, target.s, seed, 0, amplitude))?,
        _ => AntisymmetricField::potential([
            gaussian_component(grid, target.s, seed, 0, amplitude),
            gaussian_component(grid, target.s, seed, 1, amplitude),
            gaussian_component(grid, target.s, seed, 2, amplitude),
        ])?,
    };
    let norm = match &field {
        AntisymmetricField::Stream(a) => besov_norm(a, target),
        AntisymmetricField::Potential(w) => besov_norm_vector(&VectorField::new(w.to_vec())?, target),
    };
    let flagged = norm.top_share > SYNTH_SHARE_LIMIT;
    Ok(SynthResult { field, norm, flagged })
}

/// A vortex stream with its `L^p` norm on the grid and on the refined grid.
#[derive(Debug, Clone)]
pub struct VortexResult {
    pub field: AntisymmetricField,
    pub lp_norm: f64,
    pub lp_norm_refined: f64,
    pub warning: Option<String>,
}

/// `ψ(|x−c|/R)·max(|x−c|, h/2)^{−λ}` with `ψ = 1` on `[0, 1/2]`, `ψ = 0`
/// beyond 1.
pub fn vortex_stream(grid: &TorusGrid, lambda: f64, center: &[f64], radius: f64) -> Result<ScalarField> {
    let cap = grid.spacing() / 2.0;
    ScalarField::from_fn(*grid, |x| {
        let r = grid.distance(x, center);
        let psi = 1.0 - smooth_step(2.0 * r / radius - 1.0);
        if psi == 0.0 {
            0.0
        } else {
            psi * r.max(cap).powf(-lambda)
        }
    })
}

/// Radial vortex stream in `d = 2`; the `L^p` check is done at exponent `p`.
pub fn synth_vortex(
    grid: &TorusGrid,
    lambda: f64,
    center: &[f64],
    radius: f64,
    p: f64,
) -> Result<VortexResult> {
    if grid.dim() != 2 {
        return Err(Error::param("vortex synthesis is two-dimensional"));
    }
    if !(lambda >= 0.0 && radius > 0.0 && radius <= grid.side() / 2.0) {
        return Err(Error::param(format!(
            "vortex needs lambda >= 0 and 0 < R <= L/2; got lambda={lambda}, R={radius}"
        )));
    }
    let a = vortex_stream(grid, lambda, center, radius)?;
    let fine = vortex_stream(&grid.refined(2)?, lambda, center, radius)?;
    let warning = (lambda * p >= 2.0).then(|| {
        format!("A ∉ L^p: outside Corollary hypotheses (lambda*p = {} >= d = 2)", lambda * p)
    });
    Ok(VortexResult {
        lp_norm: lp_norm(&a, p)?,
        lp_norm_refined: lp_norm(&fine, p)?,
        field: AntisymmetricField::stream(a)?,
        warning,
    })
}
