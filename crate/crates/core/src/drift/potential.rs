use crate::besov::{mollify, Mollifier};
use crate::spectral::{gradient, lp_norm, upsample, ScalarField, TorusGrid, VectorField};
use crate::{Error, Result};

/// Antisymmetric matrix field `A`, stored through its potential so that
/// antisymmetry is structural.
///
/// * `d = 2`: `A = a·J` with `J = [[0, −1], [1, 0]]`.
/// * `d = 3`: `A_{ij} = ε_{ijk} w_k`.
///
/// The drift is `b^j = Σ_i ∂_i A_{ij}`, which makes `b·∇u = ∇·(A∇u)` hold for
/// every smooth `u`. In `d = 2` this gives `b = (∂₂a, −∂₁a)`, in `d = 3`
/// `b = −∇×w`.
#[derive(Debug, Clone, PartialEq)]
pub enum AntisymmetricField {
    Stream(ScalarField),
    Potential([ScalarField; 3]),
}

impl AntisymmetricField {
    pub fn stream(a: ScalarField) -> Result<Self> {
        if a.grid().dim() != 2 {
            return Err(Error::param("stream function requires d = 2"));
        }
        Ok(Self::Stream(a))
    }

    pub fn potential(w: [ScalarField; 3]) -> Result<Self> {
        if w[0].grid().dim() != 3 {
            return Err(Error::param("vector potential requires d = 3"));
        }
        w[0].check_grid(&w[1])?;
        w[0].check_grid(&w[2])?;
        Ok(Self::Potential(w))
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        match grid.dim() {
            2 => Self::Stream(ScalarField::zeros(grid)),
            _ => Self::Potential([
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
                ScalarField::zeros(grid),
            ]),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.components()[0].grid()
    }

    pub fn components(&self) -> &[ScalarField] {
        match self {
            Self::Stream(a) => std::slice::from_ref(a),
            Self::Potential(w) => w,
        }
    }

    /// Matrix entry `A_{ij}` at flat grid index `idx`.
    pub fn entry(&self, i: usize, j: usize, idx: usize) -> f64 {
        match self {
            Self::Stream(a) => {
                let v = a.values()[idx];
                match (i, j) {
                    (1, 0) => v,
                    (0, 1) => -v,
                    _ => 0.0,
                }
            }
            Self::Potential(w) => {
                let eps = |i: usize, j: usize, k: usize| -> f64 {
                    if i == j || j == k || i == k {
                        0.0
                    } else if (i, j, k) == (0, 1, 2) || (i, j, k) == (1, 2, 0) || (i, j, k) == (2, 0, 1) {
                        1.0
                    } else {
                        -1.0
                    }
                };
                (0..3).map(|k| eps(i, j, k) * w[k].values()[idx]).sum()
            }
        }
    }

    pub fn map(&self, f: impl Fn(&ScalarField) -> Result<ScalarField>) -> Result<Self> {
        Ok(match self {
            Self::Stream(a) => Self::Stream(f(a)?),
            Self::Potential(w) => Self::Potential([f(&w[0])?, f(&w[1])?, f(&w[2])?]),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|c| Ok(c.scale(s))).expect("scaling is infallible")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (Self::Stream(a), Self::Stream(b)) => {
                a.check_grid(b)?;
                Ok(Self::Stream(a + b))
            }
            (Self::Potential(a), Self::Potential(b)) => {
                a[0].check_grid(&b[0])?;
                Ok(Self::Potential([&a[0] + &b[0], &a[1] + &b[1], &a[2] + &b[2]]))
            }
            _ => Err(Error::GridMismatch("potentials of different dimension".into())),
        }
    }

    /// `A^n = ρ^n ∗ A`, so that `b(A^n) = ρ^n ∗ b(A)`.
    pub fn mollify(&self, m: &Mollifier) -> Self {
        self.map(|c| Ok(mollify(c, m))).expect("mollification is infallible")
    }

    pub fn upsample(&self, factor: usize) -> Result<Self> {
        self.map(|c| upsample(c, factor))
    }

    /// `L^p` norm of the potential (Euclidean magnitude for `d = 3`).
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        match self {
            Self::Stream(a) => lp_norm(a, p),
            Self::Potential(w) => {
                let mag = VectorField::new(w.to_vec())?.magnitude();
                lp_norm(&mag, p)
            }
        }
    }

    pub fn as_vector(&self) -> Option<VectorField> {
        match self {
            Self::Stream(_) => None,
            Self::Potential(w) => VectorField::new(w.to_vec()).ok(),
        }
    }
}

/// `b = ∇·A` computed spectrally.
pub fn drift(a: &AntisymmetricField) -> VectorField {
    match a {
        AntisymmetricField::Stream(s) => {
            let g = gradient(s);
            let [g1, g2]: [ScalarField; 2] = g.into_components().try_into().expect("d = 2");
            VectorField::new(vec![g2, g1.scale(-1.0)]).expect("shared grid")
        }
        AntisymmetricField::Potential(w) => {
            let d: Vec<VectorField> = w.iter().map(gradient).collect();
            // (∇×w)_j = ∂_{j+1} w_{j+2} − ∂_{j+2} w_{j+1}
            let comps = (0..3)
                .map(|j| {
                    let (a, b) = ((j + 1) % 3, (j + 2) % 3);
                    d[a].component(b) - d[b].component(a)
                })
                .collect();
            VectorField::new(comps).expect("shared grid")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{band_limit, divergence, gradient as grad};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(g: TorusGrid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn constant_stream_has_no_drift() {
        let g = TorusGrid::new(2, 16, 1.0).unwrap();
        let b = drift(&AntisymmetricField::stream(ScalarField::constant(g, 3.0)).unwrap());
        assert!(b.max_magnitude() < 1e-14);
    }

    #[test]
    fn single_mode_curl() {
        let l = 2.0;
        let g = TorusGrid::new(2, 32, l).unwrap();
        let a = ScalarField::from_fn(g, |x| (2.0 * PI * x[0] / l).sin()).unwrap();
        let b = drift(&AntisymmetricField::stream(a).unwrap());
        let expect = ScalarField::from_fn(g, |x| -(2.0 * PI / l) * (2.0 * PI * x[0] / l).cos()).unwrap();
        assert!(b.component(0).max_abs() < 1e-12);
        assert!((b.component(1) - &expect).max_abs() < 1e-11);
        assert!(divergence(&b).max_abs() < 1e-12);
    }

    #[test]
    fn drift_matches_finite_difference_curl() {
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for n in [32usize, 64, 128] {
            let g = TorusGrid::new(2, n, 1.0).unwrap();
            let a = ScalarField::from_fn(g, |x| {
                (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + 0.2 * (4.0 * PI * (x[0] - x[1])).sin()
            })
            .unwrap();
            let b = drift(&AntisymmetricField::stream(a.clone()).unwrap());
            let h = g.spacing();
            let mut err: f64 = 0.0;
            for idx in 0..g.len() {
                let m = g.multi_index(idx);
                let up = g.flat_index(&[m[0], (m[1] + 1) % n]);
                let dn = g.flat_index(&[m[0], (m[1] + n - 1) % n]);
                let fd = (a.values()[up] - a.values()[dn]) / (2.0 * h);
                err = err.max((fd - b.component(0).values()[idx]).abs());
            }
            errs.push(err);
            hs.push(h);
        }
        let fit = crate::stats::loglog_fit(&hs, &errs).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.1);
    }

    #[test]
    fn random_potentials_are_divergence_free() {
        for (d, n) in [(2, 8), (2, 32), (3, 8), (3, 16)] {
            let g = TorusGrid::new(d, n, 1.0).unwrap();
            let a = if d == 2 {
                AntisymmetricField::stream(random(g, 1)).unwrap()
            } else {
                AntisymmetricField::potential([random(g, 1), random(g, 2), random(g, 3)]).unwrap()
            };
            let b = drift(&a);
            assert!(divergence(&b).l2_norm() <= 1e-8 * b.l2_norm());
        }
    }

    #[test]
    fn transport_equals_divergence_form() {
        // b·∇u = ∇·(A∇u) for band-limited A and u (products stay below Nyquist)
        for d in [2, 3] {
            let g = TorusGrid::new(d, 16, 1.0).unwrap();
            let a = if d == 2 {
                AntisymmetricField::stream(band_limit(&random(g, 5), 3)).unwrap()
            } else {
                let c = |s| band_limit(&random(g, s), 3);
                AntisymmetricField::potential([c(5), c(6), c(7)]).unwrap()
            };
            let u = band_limit(&random(g, 8), 3);
            let b = drift(&a);
            let gu = grad(&u);
            let lhs = (0..d).fold(ScalarField::zeros(g), |acc, i| {
                &acc + &b.component(i).zip_with(gu.component(i), |x, y| x * y).unwrap()
            });
            let flux: Vec<ScalarField> = (0..d)
                .map(|i| {
                    let v = (0..g.len())
                        .map(|idx| (0..d).map(|j| a.entry(i, j, idx) * gu.component(j).values()[idx]).sum())
                        .collect();
                    ScalarField::new(g, v).unwrap()
                })
                .collect();
            let rhs = divergence(&VectorField::new(flux).unwrap());
            assert!((&lhs - &rhs).max_abs() < 1e-10 * lhs.max_abs(), "d = {d}");
        }
    }

    #[test]
    fn matrix_is_antisymmetric() {
        let g = TorusGrid::new(3, 8, 1.0).unwrap();
        let a = AntisymmetricField::potential([random(g, 1), random(g, 2), random(g, 3)]).unwrap();
        for idx in [0, 100, 511] {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(a.entry(i, j, idx), -a.entry(j, i, idx));
                }
            }
        }
    }
}
