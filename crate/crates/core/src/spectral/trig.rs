use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ScalarField, TorusGrid};
use crate::{Error, Result};

/// One term `amplitude·cos(ξ_k·x + phase)` with `ξ_k = 2πk/L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub k: Vec<i32>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Finite cosine series on the torus, evaluated exactly off-grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPolynomial {
    #[serde(default)]
    pub constant: f64,
    pub modes: Vec<TrigMode>,
}

impl TrigPolynomial {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            modes: vec![],
        }
    }

    pub fn single(k: &[i32], amplitude: f64, phase: f64) -> Self {
        Self {
            constant: 0.0,
            modes: vec![TrigMode {
                k: k.to_vec(),
                amplitude,
                phase,
            }],
        }
    }

    /// Checks dimensions and that every mode is strictly below Nyquist.
    pub fn validate(&self, grid: &TorusGrid) -> Result<()> {
        let half = (grid.n() / 2) as i32;
        for m in &self.modes {
            if m.k.len() != grid.dim() {
                return Err(Error::param(format!("mode {:?} has wrong dimension", m.k)));
            }
            if m.k.iter().any(|k| k.abs() >= half) {
                return Err(Error::param(format!("mode {:?} not below Nyquist", m.k)));
            }
        }
        Ok(())
    }

    fn xi(m: &TrigMode, side: f64) -> [f64; 3] {
        let mut xi = [0.0; 3];
        for (a, k) in m.k.iter().enumerate() {
            xi[a] = 2.0 * PI * *k as f64 / side;
        }
        xi
    }

    fn phase_at(m: &TrigMode, xi: &[f64; 3], x: &[f64]) -> f64 {
        m.phase + xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn eval(&self, side: f64, x: &[f64]) -> f64 {
        self.constant
            + self
                .modes
                .iter()
                .map(|m| {
                    let xi = Self::xi(m, side);
                    m.amplitude * Self::phase_at(m, &xi, x).cos()
                })
                .sum::<f64>()
    }

    /// Gradient at `x` into `out[..d]`.
    pub fn gradient(&self, side: f64, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for m in &self.modes {
            let xi = Self::xi(m, side);
            let s = -m.amplitude * Self::phase_at(m, &xi, x).sin();
            for (o, v) in out.iter_mut().zip(xi) {
                *o += s * v;
            }
        }
    }

    pub fn laplacian(&self, side: f64, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let xi = Self::xi(m, side);
                let xi2: f64 = xi.iter().map(|v| v * v).sum();
                -xi2 * m.amplitude * Self::phase_at(m, &xi, x).cos()
            })
            .sum()
    }

    /// `Δ` applied termwise, as a new polynomial.
    pub fn laplacian_poly(&self, side: f64) -> Self {
        Self {
            constant: 0.0,
            modes: self
                .modes
                .iter()
                .map(|m| {
                    let xi2: f64 = Self::xi(m, side).iter().map(|v| v * v).sum();
                    TrigMode {
                        amplitude: -xi2 * m.amplitude,
                        ..m.clone()
                    }
                })
                .collect(),
        }
    }

    pub fn sample(&self, grid: &TorusGrid) -> Result<ScalarField> {
        self.validate(grid)?;
        ScalarField::from_fn(*grid, |x| self.eval(grid.side(), x))
    }

    /// Oscillation bound `2 Σ|a_k|`.
    pub fn oscillation_bound(&self) -> f64 {
        2.0 * self.modes.iter().map(|m| m.amplitude.abs()).sum::<f64>()
    }

    pub fn sup_bound(&self) -> f64 {
        self.constant.abs() + self.modes.iter().map(|m| m.amplitude.abs()).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{gradient, laplacian};

    #[test]
    fn derivatives_match_spectral_operators() {
        let g = TorusGrid::new(2, 32, 1.7).unwrap();
        let p = TrigPolynomial {
            constant: 0.3,
            modes: vec![
                TrigMode { k: vec![1, -2], amplitude: 0.7, phase: 0.4 },
                TrigMode { k: vec![3, 0], amplitude: -0.2, phase: 0.0 },
            ],
        };
        let f = p.sample(&g).unwrap();
        let gr = gradient(&f);
        let lap = laplacian(&f);
        for idx in [0, 77, 500, 1023] {
            let x = g.point(idx);
            let mut out = [0.0; 2];
            p.gradient(g.side(), &x[..2], &mut out);
            assert!((out[0] - gr.component(0).values()[idx]).abs() < 1e-11);
            assert!((out[1] - gr.component(1).values()[idx]).abs() < 1e-11);
            assert!((p.laplacian(g.side(), &x[..2]) - lap.values()[idx]).abs() < 1e-10);
            assert!((p.laplacian_poly(g.side()).eval(g.side(), &x[..2]) - lap.values()[idx]).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_nyquist_modes() {
        let g = TorusGrid::new(2, 8, 1.0).unwrap();
        assert!(TrigPolynomial::single(&[4, 0], 1.0, 0.0).validate(&g).is_err());
        assert!(TrigPolynomial::single(&[1, 0, 0], 1.0, 0.0).validate(&g).is_err());
    }
}
