use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on the torus `[0, L)^dim` with `N` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    side: f64,
}

/// One lattice frequency: integer index `k` and angular frequency `xi = 2πk/L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub dim: usize,
    pub k: [i32; 3],
    pub xi: [f64; 3],
    /// `k_i == -N/2` on that axis.
    pub nyquist: [bool; 3],
}

impl Mode {
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.xi[..self.dim].iter().map(|x| x * x).sum()
    }

    /// Frequency with Nyquist components zeroed, used by differentiation.
    pub fn derivative_xi(&self) -> [f64; 3] {
        let mut out = self.xi;
        for i in 0..self.dim {
            if self.nyquist[i] {
                out[i] = 0.0;
            }
        }
        out
    }

    pub fn max_abs_k(&self) -> i32 {
        self.k[..self.dim].iter().map(|k| k.abs()).max().unwrap_or(0)
    }

    pub fn k_norm(&self) -> f64 {
        self.k[..self.dim]
            .iter()
            .map(|&k| (k as f64) * (k as f64))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.k[..self.dim].iter().all(|&k| k == 0)
    }
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, side: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{2, 3}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {n} must be a power of two >= 8"
            )));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("side length {side} must be positive")));
        }
        Ok(TorusGrid { dim, n, side })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Angular Nyquist frequency `πN/L`.
    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.side
    }

    /// Largest `|ξ|` on the lattice (the corner frequency).
    pub fn max_frequency(&self) -> f64 {
        self.nyquist() * (self.dim as f64).sqrt()
    }

    /// Signed integer wavenumber of array index `i` along one axis.
    pub fn wavenumber(&self, i: usize) -> i32 {
        if i < self.n / 2 {
            i as i32
        } else {
            i as i32 - self.n as i32
        }
    }

    pub fn frequency(&self, k: i32) -> f64 {
        2.0 * PI * k as f64 / self.side
    }

    /// Multi-index of flat index `idx` (axis 0 slowest).
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.n + (i % self.n))
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = m[a] as f64 * h;
        }
        x
    }

    /// Lattice mode stored at flat coefficient index `idx`.
    pub fn mode(&self, idx: usize) -> Mode {
        let m = self.multi_index(idx);
        let mut k = [0i32; 3];
        let mut xi = [0.0; 3];
        let mut nyquist = [false; 3];
        for a in 0..self.dim {
            k[a] = self.wavenumber(m[a]);
            xi[a] = self.frequency(k[a]);
            nyquist[a] = k[a] == -(self.n as i32 / 2);
        }
        Mode {
            dim: self.dim,
            k,
            xi,
            nyquist,
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.len()).map(move |i| self.mode(i))
    }

    /// Wraps a coordinate into `[0, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let w = x.rem_euclid(self.side);
        if w >= self.side {
            0.0
        } else {
            w
        }
    }

    /// Minimal-image displacement `x - y` on the torus (per component).
    pub fn displacement(&self, x: f64, y: f64) -> f64 {
        let mut d = (x - y).rem_euclid(self.side);
        if d > 0.5 * self.side {
            d -= self.side;
        }
        d
    }

    /// Minimal-image Euclidean distance.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dim)
            .map(|a| self.displacement(x[a], y[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// The same torus with `factor` times more points per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        TorusGrid::new(self.dim, self.n * factor, self.side)
    }

    pub fn same_as(&self, other: &TorusGrid) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(1, 16, 1.0).is_err());
        assert!(TorusGrid::new(2, 12, 1.0).is_err());
        assert!(TorusGrid::new(2, 4, 1.0).is_err());
        assert!(TorusGrid::new(2, 16, -1.0).is_err());
        assert!(TorusGrid::new(3, 8, 2.0).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let g = TorusGrid::new(3, 8, 1.0).unwrap();
        for idx in [0, 1, 7, 8, 63, 64, 511] {
            assert_eq!(g.flat_index(&g.multi_index(idx)), idx);
        }
    }

    #[test]
    fn wavenumbers_cover_half_open_range() {
        let g = TorusGrid::new(2, 8, 1.0).unwrap();
        let ks: Vec<i32> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert!(g.mode(4 * 8).nyquist[0]);
    }

    #[test]
    fn minimal_image() {
        let g = TorusGrid::new(2, 8, 1.0).unwrap();
        assert!((g.displacement(0.95, 0.05) + 0.1).abs() < 1e-12);
        assert!((g.distance(&[0.95, 0.0], &[0.05, 0.0]) - 0.1).abs() < 1e-12);
    }
}
