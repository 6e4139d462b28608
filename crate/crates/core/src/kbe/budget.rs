//! Per-step energy integrals for the dissipation table.
//!
//! On one step each mode obeys `c' = −λc + F(s)`. `F` is taken as the cubic
//! Hermite interpolant of the transport term and its time derivative at the
//! two ends, so `c(x·dt) = e^{−αx}c₀ + dt·Σ_k a_k g_k(x)` with `α = λ·dt` and
//! `g_k(x) = ∫_0^x e^{−α(x−y)} y^k dy`. The step integral of `|c|²` is then a
//! quadratic form in five coefficients whose Gram matrix depends on `α` only.

use std::collections::HashMap;

use num_complex::Complex64;

pub(crate) const BASIS: usize = 5;
pub(crate) type Gram = [[f64; BASIS]; BASIS];

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[0, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

/// `φ_j(z) = ∫_0^1 e^{−z(1−θ)} θ^{j−1}/(j−1)! dθ` for `j = 0..BASIS`, `φ_0 = e^{−z}`.
fn phis(z: f64) -> [f64; BASIS] {
    let mut out = [0.0; BASIS];
    if z < 1.0 {
        for (j, o) in out.iter_mut().enumerate() {
            // Σ_m (−z)^m/(m+j)!
            let mut term = 1.0 / (1..=j).map(|k| k as f64).product::<f64>();
            let mut s = 0.0;
            for m in 0..40 {
                s += term;
                term *= -z / (m + j + 1) as f64;
                if term.abs() < 1e-18 * s.abs() {
                    break;
                }
            }
            *o = s;
        }
    } else {
        out[0] = (-z).exp();
        let mut fact = 1.0;
        for j in 1..BASIS {
            out[j] = (1.0 / fact - out[j - 1]) / z;
            fact *= j as f64;
        }
    }
    out
}

/// Basis values `(e^{−αx}, g_0(x), …, g_3(x))`.
fn basis(alpha: f64, x: f64) -> [f64; BASIS] {
    let p = phis(alpha * x);
    let mut out = [0.0; BASIS];
    out[0] = p[0];
    let mut fact = 1.0;
    let mut xp = x;
    for k in 0..BASIS - 1 {
        out[k + 1] = xp * fact * p[k + 1];
        xp *= x;
        fact *= (k + 1) as f64;
    }
    out
}

/// `∫_0^1 basis_i·basis_j dx`, with panels graded towards `x = 0` for stiff modes.
pub(crate) fn gram(alpha: f64) -> Gram {
    let rule = gauss_legendre(12);
    let mut cuts = vec![0.0];
    if alpha > 1.0 {
        let mut c = 0.25 / alpha;
        while c < 1.0 {
            cuts.push(c);
            c *= 2.0;
        }
    }
    cuts.push(1.0);
    let mut g = [[0.0; BASIS]; BASIS];
    for w in cuts.windows(2) {
        let (a, h) = (w[0], w[1] - w[0]);
        for &(t, wt) in &rule {
            let b = basis(alpha, a + h * t);
            for i in 0..BASIS {
                for j in 0..BASIS {
                    g[i][j] += h * wt * b[i] * b[j];
                }
            }
        }
    }
    g
}

/// Gram matrices for every mode, shared between modes with equal `λ`.
#[derive(Debug, Clone)]
pub(crate) struct StepGrams {
    grams: Vec<Gram>,
    index: Vec<usize>,
}

impl StepGrams {
    pub(crate) fn new(lambda: &[f64], dt: f64) -> Self {
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let mut grams = Vec::new();
        let index = lambda
            .iter()
            .map(|l| {
                *seen.entry(l.to_bits()).or_insert_with(|| {
                    grams.push(gram(l * dt));
                    grams.len() - 1
                })
            })
            .collect();
        Self { grams, index }
    }

    /// `∫_0^dt |c|² ds` for one mode given its value and the transport term
    /// `f` with derivative `df` at both ends.
    pub(crate) fn mode_integral(
        &self,
        i: usize,
        c0: Complex64,
        f: [Complex64; 2],
        df: [Complex64; 2],
        dt: f64,
    ) -> f64 {
        let g = &self.grams[self.index[i]];
        let (d0, d1) = (df[0] * dt, df[1] * dt);
        let u = [
            c0,
            f[0] * dt,
            d0 * dt,
            ((f[1] - f[0]) * 3.0 - d0 * 2.0 - d1) * dt,
            ((f[0] - f[1]) * 2.0 + d0 + d1) * dt,
        ];
        let mut s = 0.0;
        for a in 0..BASIS {
            s += g[a][a] * u[a].norm_sqr();
            for b in a + 1..BASIS {
                s += 2.0 * g[a][b] * (u[a] * u[b].conj()).re;
            }
        }
        dt * s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed forms for the first three basis functions.
    fn closed(a: f64) -> [f64; 6] {
        let e1 = (-a).exp();
        let e2 = e1 * e1;
        [
            (1.0 - e2) / (2.0 * a),
            (1.0 - 2.0 * e1 + e2) / (2.0 * a * a),
            (1.0 - 2.0 * a * e1 - e2) / (2.0 * a.powi(3)),
            (2.0 * a - 3.0 + 4.0 * e1 - e2) / (2.0 * a.powi(3)),
            (a * a - 2.0 * a + 1.0 + 2.0 * (a - 1.0) * e1 + e2) / (2.0 * a.powi(4)),
            1.0 / (3.0 * a * a) - 1.0 / a.powi(3) + 1.0 / a.powi(4) - 2.0 * e1 / a.powi(4)
                + 1.0 / (2.0 * a.powi(5))
                - e2 / (2.0 * a.powi(5)),
        ]
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let r = gauss_legendre(12);
        for p in 0..24 {
            let s: f64 = r.iter().map(|(x, w)| w * x.powi(p)).sum();
            assert!((s - 1.0 / (p + 1) as f64).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn gram_matches_closed_forms() {
        for alpha in [0.5, 1.0, 4.0, 30.0, 1e4] {
            let g = gram(alpha);
            let got = [g[0][0], g[0][1], g[0][2], g[1][1], g[1][2], g[2][2]];
            for (k, (x, y)) in got.iter().zip(closed(alpha)).enumerate() {
                assert!((x - y).abs() <= 1e-11 * y.abs(), "alpha={alpha} k={k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn gram_zero_rate_is_monomial_moments() {
        // g_k(x) = x^{k+1}/(k+1) when α = 0
        let g = gram(0.0);
        for i in 1..BASIS {
            for j in 1..BASIS {
                let want = 1.0 / (i * j * (i + j + 1)) as f64;
                assert!((g[i][j] - want).abs() < 1e-14);
            }
        }
        assert!((g[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn phi_branches_agree_at_switch() {
        // evaluate the series slightly past its branch and the recursion at it
        let z = 1.0;
        let rec = phis(z);
        let mut ser = [0.0; BASIS];
        for (j, o) in ser.iter_mut().enumerate() {
            let mut term = 1.0 / (1..=j).map(|k| k as f64).product::<f64>();
            for m in 0..60 {
                *o += term;
                term *= -z / (m + j + 1) as f64;
            }
        }
        for j in 0..BASIS {
            assert!((rec[j] - ser[j]).abs() < 1e-14 * ser[j], "j={j}");
        }
    }

    #[test]
    fn cubic_forcing_is_reproduced() {
        // c' = −λc + s³ has an explicit solution; compare the integral of |c|².
        let (lam, dt) = (7.0, 0.3);
        let grams = StepGrams::new(&[lam], dt);
        let c0 = Complex64::new(0.4, -0.2);
        let f = [Complex64::new(0.0, 0.0), Complex64::new(dt.powi(3), 0.0)];
        let df = [Complex64::new(0.0, 0.0), Complex64::new(3.0 * dt * dt, 0.0)];
        let got = grams.mode_integral(0, c0, f, df, dt);
        // reference: fine trapezoid on the ODE solved by RK4
        let n = 200_000;
        let h = dt / n as f64;
        let rhs = |s: f64, c: Complex64| -c * lam + s.powi(3);
        let (mut c, mut acc) = (c0, 0.0);
        for k in 0..n {
            let s = k as f64 * h;
            let before = c.norm_sqr();
            let k1 = rhs(s, c);
            let k2 = rhs(s + h / 2.0, c + k1 * (h / 2.0));
            let k3 = rhs(s + h / 2.0, c + k2 * (h / 2.0));
            let k4 = rhs(s + h, c + k3 * h);
            c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            acc += 0.5 * h * (before + c.norm_sqr());
        }
        assert!((got - acc).abs() < 1e-10 * acc, "{got} vs {acc}");
    }
}
