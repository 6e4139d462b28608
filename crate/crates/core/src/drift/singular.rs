use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::AntisymmetricField;
use crate::besov::smooth_step;
use crate::spectral::{ScalarField, TorusGrid};
use crate::stats::{loglog_fit, LineFit};
use crate::{Error, Result};

/// Building block of a singular set. Points and balls are static in time;
/// cylinders occupy `[t0, t1] × B_r(c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Point { center: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Cylinder { t0: f64, t1: f64, center: Vec<f64>, radius: f64 },
}

impl Primitive {
    fn parts(&self) -> (f64, f64, &[f64], f64) {
        match self {
            Self::Point { center } => (f64::NEG_INFINITY, f64::INFINITY, center, 0.0),
            Self::Ball { center, radius } => (f64::NEG_INFINITY, f64::INFINITY, center, *radius),
            Self::Cylinder { t0, t1, center, radius } => (*t0, *t1, center, *radius),
        }
    }

    fn time_gap(&self, t: f64) -> f64 {
        let (t0, t1, _, _) = self.parts();
        (t0 - t).max(t - t1).max(0.0)
    }

    fn distance(&self, grid: &TorusGrid, t: f64, x: &[f64]) -> f64 {
        let (_, _, c, r) = self.parts();
        let dx = (grid.distance(x, c) - r).max(0.0);
        dx.hypot(self.time_gap(t))
    }

    /// Radius of the spatial slice of `B_ε(primitive)` at time `t`, if any.
    fn slice_radius(&self, t: f64, eps: f64) -> Option<f64> {
        let (_, _, _, r) = self.parts();
        let gap = self.time_gap(t);
        (gap <= eps).then(|| r + (eps * eps - gap * gap).sqrt())
    }
}

fn ball_volume(d: usize, r: f64) -> f64 {
    match d {
        2 => PI * r * r,
        _ => 4.0 / 3.0 * PI * r.powi(3),
    }
}

/// Compact space-time set `K ⊂ [0, T] × T^d` as a union of primitives.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SingularSet {
    pub primitives: Vec<Primitive>,
}

impl SingularSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn point(center: &[f64]) -> Self {
        Self {
            primitives: vec![Primitive::Point { center: center.to_vec() }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn validate(&self, grid: &TorusGrid) -> Result<()> {
        for p in &self.primitives {
            let (t0, t1, c, r) = p.parts();
            if c.len() != grid.dim() || r < 0.0 || t0 > t1 || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("malformed singular primitive {p:?}")));
            }
        }
        Ok(())
    }

    /// Space-time Euclidean distance from `(t, x)` to `K` (torus minimal
    /// image in space); `+∞` for the empty set.
    pub fn distance(&self, grid: &TorusGrid, t: f64, x: &[f64]) -> f64 {
        self.primitives
            .iter()
            .map(|p| p.distance(grid, t, x))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `K` does not depend on time.
    pub fn is_static(&self) -> bool {
        self.primitives
            .iter()
            .all(|p| !matches!(p, Primitive::Cylinder { .. }))
    }

    /// Distance field at time `t` on the grid.
    pub fn distance_field(&self, grid: &TorusGrid, t: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                self.distance(grid, t, &x[..grid.dim()])
            })
            .collect()
    }
}

/// Smooth cutoff `g_ε` with `g_ε = 0` on `B_{ε/4}(K)` and `g_ε = 1` outside
/// `B_{ε/2}(K)`, evaluated at one time.
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    pub eps: f64,
    pub time: f64,
    pub g: ScalarField,
}

impl CutoffFamily {
    pub fn profile(eps: f64, dist: f64) -> f64 {
        smooth_step((dist - eps / 4.0) / (eps / 4.0))
    }
}

pub fn cutoff(k: &SingularSet, grid: &TorusGrid, eps: f64, t: f64) -> Result<CutoffFamily> {
    let min = 4.0 * grid.spacing();
    if !(eps > min) {
        return Err(Error::Unresolved { eps, min });
    }
    k.validate(grid)?;
    let g = k
        .distance_field(grid, t)
        .into_iter()
        .map(|dist| CutoffFamily::profile(eps, dist))
        .collect();
    Ok(CutoffFamily {
        eps,
        time: t,
        g: ScalarField::new(*grid, g)?,
    })
}

/// `g_ε A`, multiplying every potential component pointwise.
pub fn apply_cutoff(a: &AntisymmetricField, g: &CutoffFamily) -> Result<AntisymmetricField> {
    a.map(|c| c.zip_with(&g.g, |x, y| x * y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureMode {
    Analytic,
    GridCount,
}

#[derive(Debug, Clone, Serialize)]
pub struct NeighborhoodMeasure {
    pub eps: f64,
    /// `Leb_{d+1}(B_ε(K) ∩ [0,T] × T^d)`
    pub spacetime: f64,
    /// `(t, Leb_d(B_ε(K)_t))`
    pub slices: Vec<(f64, f64)>,
    pub sup_slice: f64,
    /// Grid-count only: set when `ε < 2h`.
    pub unresolved: bool,
}

/// Space-time volume of the part of `B_ε(cylinder)` lying in `[0, T]`.
fn analytic_spacetime(p: &Primitive, d: usize, eps: f64, horizon: f64) -> f64 {
    let (t0, t1, _, r) = p.parts();
    let core = (t1.min(horizon) - t0.max(0.0)).max(0.0) * ball_volume(d, r + eps);
    let cap_closed = match d {
        2 => PI * (r * r * eps + PI * r * eps * eps / 2.0 + 2.0 * eps.powi(3) / 3.0),
        _ => {
            4.0 / 3.0
                * PI
                * (r.powi(3) * eps + 0.75 * PI * r * r * eps * eps + 2.0 * r * eps.powi(3) + 3.0 * PI * eps.powi(4) / 16.0)
        }
    };
    let cap = |start: f64, dir: f64| -> f64 {
        // cap spans start + dir·τ for τ ∈ [0, ε]
        let end = start + dir * eps;
        let (lo, hi) = if dir > 0.0 { (start, end) } else { (end, start) };
        if !start.is_finite() || hi <= 0.0 || lo >= horizon {
            return 0.0;
        }
        if lo >= 0.0 && hi <= horizon {
            return cap_closed;
        }
        // clipped cap: τ-range inside [0, T], then τ = ε sin θ and Simpson in θ
        let (ta, tb) = if dir > 0.0 {
            ((0.0 - start).max(0.0), (horizon - start).min(eps))
        } else {
            ((start - horizon).max(0.0), start.min(eps))
        };
        if tb <= ta {
            return 0.0;
        }
        let (th0, th1) = ((ta / eps).min(1.0).asin(), (tb / eps).min(1.0).asin());
        let m = 2000;
        let h = (th1 - th0) / m as f64;
        (0..=m)
            .map(|i| {
                let th = th0 + i as f64 * h;
                let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * ball_volume(d, r + eps * th.cos()) * eps * th.cos()
            })
            .sum::<f64>()
            * h
            / 3.0
    };
    core + cap(t1, 1.0) + cap(t0, -1.0)
}

/// Measure of `B_ε(K)`, analytic (sum over primitives, exact when their
/// neighborhoods are disjoint) or by counting grid cell centres. Slices are
/// reported at `n_slices` equally spaced times in `[0, T]`.
pub fn neighborhood_measure(
    k: &SingularSet,
    grid: &TorusGrid,
    eps: f64,
    horizon: f64,
    n_slices: usize,
    mode: MeasureMode,
) -> Result<NeighborhoodMeasure> {
    k.validate(grid)?;
    if !(eps > 0.0 && horizon > 0.0 && n_slices >= 1) {
        return Err(Error::param("measure needs eps > 0, T > 0 and at least one slice"));
    }
    let d = grid.dim();
    let times: Vec<f64> = if n_slices == 1 {
        vec![0.0]
    } else {
        (0..n_slices).map(|i| horizon * i as f64 / (n_slices - 1) as f64).collect()
    };
    let slice = |t: f64| -> f64 {
        match mode {
            MeasureMode::Analytic => k
                .primitives
                .iter()
                .filter_map(|p| p.slice_radius(t, eps))
                .map(|r| ball_volume(d, r))
                .sum(),
            MeasureMode::GridCount => {
                k.distance_field(grid, t).iter().filter(|&&x| x <= eps).count() as f64 * grid.cell_volume()
            }
        }
    };
    let slices: Vec<(f64, f64)> = times.iter().map(|&t| (t, slice(t))).collect();
    let sup_slice = slices.iter().map(|s| s.1).fold(0.0, f64::max);
    let spacetime = match mode {
        MeasureMode::Analytic => k
            .primitives
            .iter()
            .map(|p| analytic_spacetime(p, d, eps, horizon))
            .sum(),
        MeasureMode::GridCount if k.is_static() => slice(0.0) * horizon,
        MeasureMode::GridCount => {
            // midpoint rule in time with the spatial step as resolution
            let nt = ((horizon / grid.spacing()).ceil() as usize).max(1);
            let dt = horizon / nt as f64;
            (0..nt).map(|i| slice((i as f64 + 0.5) * dt)).sum::<f64>() * dt
        }
    };
    Ok(NeighborhoodMeasure {
        eps,
        spacetime,
        slices,
        sup_slice,
        unresolved: mode == MeasureMode::GridCount && eps < 2.0 * grid.spacing(),
    })
}

/// Fitted exponent of `ε ↦ measure` over an `ε` grid; `spacetime` selects
/// the `(d+1)`-dimensional measure, otherwise the sup over slices.
pub fn measure_exponent(
    k: &SingularSet,
    grid: &TorusGrid,
    eps: &[f64],
    horizon: f64,
    mode: MeasureMode,
    spacetime: bool,
) -> Result<(Vec<NeighborhoodMeasure>, LineFit)> {
    let ms = eps
        .iter()
        .map(|&e| neighborhood_measure(k, grid, e, horizon, 5, mode))
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = ms
        .iter()
        .map(|m| if spacetime { m.spacetime } else { m.sup_slice })
        .collect();
    let fit = loglog_fit(eps, &ys).ok_or_else(|| Error::param("degenerate measure fit"))?;
    Ok((ms, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> TorusGrid {
        TorusGrid::new(2, 256, 1.0).unwrap()
    }

    #[test]
    fn distance_is_lipschitz() {
        let g = grid();
        let k = SingularSet {
            primitives: vec![
                Primitive::Point { center: vec![0.2, 0.3] },
                Primitive::Cylinder { t0: 0.3, t1: 0.6, center: vec![0.7, 0.7], radius: 0.05 },
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let a = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let b = [a[0] + rng.random_range(-0.05..0.05), a[1] + rng.random_range(-0.05..0.05)];
            let (ta, tb) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let lhs = (k.distance(&g, ta, &a) - k.distance(&g, tb, &b)).abs();
            let rhs = g.distance(&a, &b).hypot(ta - tb);
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn empty_set_gives_identity_cutoff() {
        let g = TorusGrid::new(2, 32, 1.0).unwrap();
        let c = cutoff(&SingularSet::empty(), &g, 0.2, 0.0).unwrap();
        assert!(c.g.values().iter().all(|&v| v == 1.0));
        let a = AntisymmetricField::stream(ScalarField::from_fn(g, |x| x[0].sin()).unwrap()).unwrap();
        assert_eq!(apply_cutoff(&a, &c).unwrap(), a);
    }

    #[test]
    fn cutoff_plateaus_hold_exactly() {
        let g = grid();
        let k = SingularSet::point(&[0.5, 0.5]);
        let eps = 0.1;
        let c = cutoff(&k, &g, eps, 0.0).unwrap();
        for i in 0..g.len() {
            let x = g.point(i);
            let dist = k.distance(&g, 0.0, &x[..2]);
            let v = c.g.values()[i];
            assert!((0.0..=1.0).contains(&v));
            if dist >= eps / 2.0 {
                assert_eq!(v, 1.0);
            }
            if dist <= eps / 4.0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn cutoff_rejects_unresolved_eps() {
        let g = TorusGrid::new(2, 32, 1.0).unwrap();
        assert!(matches!(
            cutoff(&SingularSet::point(&[0.5, 0.5]), &g, 0.1, 0.0),
            Err(Error::Unresolved { .. })
        ));
    }

    #[test]
    fn point_ball_area_and_exponent() {
        let g = grid();
        let k = SingularSet::point(&[0.5, 0.5]);
        let m = neighborhood_measure(&k, &g, 0.1, 1.0, 3, MeasureMode::Analytic).unwrap();
        assert!((m.sup_slice - PI * 0.01).abs() < 1e-14);
        assert!((m.spacetime - PI * 0.01).abs() < 1e-14);
        let (_, fit) = measure_exponent(&k, &g, &[0.02, 0.05, 0.1, 0.2], 1.0, MeasureMode::Analytic, false).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-10);
        let (_, fit) = measure_exponent(&k, &g, &[0.02, 0.05, 0.1, 0.2], 0.5, MeasureMode::Analytic, true).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-10);
    }

    #[test]
    fn grid_count_converges_to_analytic() {
        let g = grid();
        let sets = [
            SingularSet::point(&[0.5, 0.5]),
            SingularSet {
                primitives: vec![Primitive::Ball { center: vec![0.3, 0.6], radius: 0.1 }],
            },
            SingularSet {
                primitives: vec![Primitive::Cylinder { t0: 0.2, t1: 0.5, center: vec![0.5, 0.5], radius: 0.05 }],
            },
        ];
        for k in &sets {
            for eps in [0.05, 0.1] {
                let a = neighborhood_measure(k, &g, eps, 1.0, 5, MeasureMode::Analytic).unwrap();
                let c = neighborhood_measure(k, &g, eps, 1.0, 5, MeasureMode::GridCount).unwrap();
                assert!((c.spacetime / a.spacetime - 1.0).abs() < 0.05, "{k:?} {eps}");
                assert!((c.sup_slice / a.sup_slice - 1.0).abs() < 0.05);
            }
        }
    }

    #[test]
    fn cylinder_caps_match_quadrature() {
        // closed-form caps against direct time integration of slice areas
        let p = Primitive::Cylinder { t0: 0.3, t1: 0.5, center: vec![0.5, 0.5], radius: 0.07 };
        let eps = 0.08;
        let exact = analytic_spacetime(&p, 2, eps, 1.0);
        let m = 200_000;
        let dt = 1.0 / m as f64;
        let num: f64 = (0..m)
            .map(|i| p.slice_radius((i as f64 + 0.5) * dt, eps).map_or(0.0, |r| ball_volume(2, r)))
            .sum::<f64>()
            * dt;
        assert!((exact - num).abs() < 1e-8, "{exact} vs {num}");
        let clipped = analytic_spacetime(&p, 2, eps, 0.52);
        let num_c: f64 = (0..m)
            .map(|i| (i as f64 + 0.5) * dt * 0.52)
            .map(|t| p.slice_radius(t, eps).map_or(0.0, |r| ball_volume(2, r)))
            .sum::<f64>()
            * dt
            * 0.52;
        assert!((clipped - num_c).abs() < 1e-7);
    }

    #[test]
    fn measure_vanishes_as_eps_shrinks() {
        let g = grid();
        let k = SingularSet {
            primitives: vec![Primitive::Cylinder { t0: 0.0, t1: 1.0, center: vec![0.5, 0.5], radius: 0.0 }],
        };
        let vals: Vec<f64> = [0.2, 0.1, 0.05, 0.02, 0.01]
            .iter()
            .map(|&e| neighborhood_measure(&k, &g, e, 1.0, 9, MeasureMode::Analytic).unwrap().sup_slice)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(vals[4] < 1e-3);
    }

    #[test]
    fn grid_count_flags_unresolved() {
        let g = TorusGrid::new(2, 32, 1.0).unwrap();
        let m = neighborhood_measure(&SingularSet::point(&[0.5, 0.5]), &g, 0.04, 1.0, 1, MeasureMode::GridCount).unwrap();
        assert!(m.unresolved);
    }
}
