use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::spectral::{map_modes, ScalarField, TorusGrid};

/// Spacing of the tabulated Fourier transform of the profile.
const TABLE_STEP: f64 = 1.0 / 64.0;
/// Beyond this frequency the transform is below 1e-17 and set to zero.
const TABLE_MAX: f64 = 1024.0;
/// Trapezoid nodes on `[0, 1]` for the projection profile.
const PROFILE_NODES: usize = 512;

struct Profile {
    /// Normalization making the bump integrate to one.
    norm: f64,
    /// `ρ̂(ω)` at `ω = i · TABLE_STEP`.
    table: Vec<f64>,
}

fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Unnormalized one-dimensional projection `P(t) = ∫ bump(t² + |y|²) dy`
/// over the orthogonal hyperplane.
fn projection(dim: usize, t: f64) -> f64 {
    let a2 = 1.0 - t * t;
    if a2 <= 0.0 {
        return 0.0;
    }
    let m = 256;
    match dim {
        2 => {
            // ∫_{-a}^{a} exp(-1/(a² − s²)) ds; integrand flat at both ends
            let a = a2.sqrt();
            let h = 2.0 * a / m as f64;
            (1..m).map(|i| bump(t * t + (-a + i as f64 * h).powi(2))).sum::<f64>() * h
        }
        3 => {
            // 2π ∫_0^a exp(-1/(a² − r²)) r dr = π ∫_0^{a²} exp(-1/u) du, by
            // composite Simpson since the integrand is not flat at u = a²
            let m = 2048;
            let h = a2 / m as f64;
            let f = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
            let inner: f64 = (1..m)
                .map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h))
                .sum();
            PI * h / 3.0 * (inner + f(a2))
        }
        _ => unreachable!("dimension checked by TorusGrid"),
    }
}

fn build_profile(dim: usize) -> Profile {
    let h = 1.0 / PROFILE_NODES as f64;
    let p: Vec<f64> = (0..=PROFILE_NODES).map(|i| projection(dim, i as f64 * h)).collect();
    // even integrand, all derivatives vanish at t = 1: trapezoid is spectral
    let weight = |i: usize| if i == 0 { 0.5 } else { 1.0 };
    let mass = 2.0 * h * (0..PROFILE_NODES).map(|i| weight(i) * p[i]).sum::<f64>();
    let n_table = (TABLE_MAX / TABLE_STEP) as usize + 3;
    let table = (0..n_table)
        .map(|k| {
            let w = k as f64 * TABLE_STEP;
            2.0 * h
                * (0..PROFILE_NODES)
                    .map(|i| weight(i) * p[i] * (w * i as f64 * h).cos())
                    .sum::<f64>()
                / mass
        })
        .collect();
    // 2∫_0^1 P is the integral of the bump over the unit ball
    Profile {
        norm: 1.0 / mass,
        table,
    }
}

fn profile(dim: usize) -> &'static Profile {
    static P2: OnceLock<Profile> = OnceLock::new();
    static P3: OnceLock<Profile> = OnceLock::new();
    match dim {
        2 => P2.get_or_init(|| build_profile(2)),
        _ => P3.get_or_init(|| build_profile(3)),
    }
}

/// Standard mollifier `ρ^n = n^d ρ(n·)` with `ρ = c·exp(−1/(1−|x|²))` on the
/// unit ball, periodized onto the torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub dim: usize,
    pub level: f64,
}

impl Mollifier {
    pub fn new(dim: usize, level: f64) -> crate::Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(crate::Error::param(format!("mollifier dimension {dim}")));
        }
        if !(level.is_finite() && level > 0.0) {
            return Err(crate::Error::param(format!("mollification level {level}")));
        }
        Ok(Self { dim, level })
    }

    /// `ρ(x)` for `|x|² = r2`.
    pub fn profile(&self, r2: f64) -> f64 {
        profile(self.dim).norm * bump(r2)
    }

    /// Fourier transform `ρ̂(ω) = ∫ ρ(x) e^{-iω·x} dx` of the unit profile as a
    /// function of `|ω|`, with `ρ̂(0) = 1`.
    pub fn profile_hat(dim: usize, omega: f64) -> f64 {
        let w = omega.abs();
        if w >= TABLE_MAX {
            return 0.0;
        }
        let t = &profile(dim).table;
        let x = w / TABLE_STEP;
        let i = (x as usize).max(1).min(t.len() - 3);
        let u = x - i as f64;
        // cubic Lagrange through i-1..=i+2
        let (a, b, c, d) = (t[i - 1], t[i], t[i + 1], t[i + 2]);
        let l0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let l1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let l2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let l3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        a * l0 + b * l1 + c * l2 + d * l3
    }

    /// Multiplier of `ρ^n ∗ ·` at frequency magnitude `xi`.
    pub fn multiplier(&self, xi: f64) -> f64 {
        Self::profile_hat(self.dim, xi / self.level)
    }

    /// Grid samples of the periodized `ρ^n` centred at the origin.
    pub fn sample(&self, grid: &TorusGrid) -> ScalarField {
        let n = self.level;
        let scale = n.powi(self.dim as i32);
        let origin = [0.0; 3];
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                let r = grid.distance(&x[..grid.dim()], &origin[..grid.dim()]);
                scale * self.profile((n * r).powi(2))
            })
            .collect();
        ScalarField::new(*grid, values).expect("finite samples")
    }

    /// Warning text when the support radius `1/n` is below two grid cells.
    pub fn resolution_warning(&self, grid: &TorusGrid) -> Option<String> {
        let radius = 1.0 / self.level;
        (radius < 2.0 * grid.spacing()).then(|| {
            format!(
                "mollifier under-resolved: support radius {radius:.3e} < 2h = {:.3e}",
                2.0 * grid.spacing()
            )
        })
    }
}

/// `ρ^n ∗ u`, applied exactly as the Fourier multiplier `ρ̂(ξ/n)`.
pub fn mollify(u: &ScalarField, m: &Mollifier) -> ScalarField {
    map_modes(u, |mode| m.multiplier(mode.norm()))
}
