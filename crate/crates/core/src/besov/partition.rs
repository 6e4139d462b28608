use serde::{Deserialize, Serialize};

use crate::spectral::TorusGrid;
use crate::{Error, Result};

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Dyadic partition of unity built from a radial cutoff `χ` that equals one
/// on `|ξ| ≤ 1` and vanishes on `|ξ| ≥ 4/3`.
///
/// `φ_{-1} = χ`, `φ_j = χ(·/2^{j+1}) − χ(·/2^j)` for `j ≥ 0`. The sum of
/// `φ_{-1}, …, φ_J` telescopes to `χ(·/2^{J+1})`, so the partition is exact
/// on every lattice point once `2^{J+1}` exceeds the largest lattice
/// frequency.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DyadicPartition;

impl DyadicPartition {
    pub const TRANSITION: f64 = 4.0 / 3.0;

    pub fn chi(r: f64) -> f64 {
        1.0 - smooth_step(3.0 * (r - 1.0))
    }

    pub fn phi(j: i32, r: f64) -> f64 {
        match j {
            j if j < -1 => 0.0,
            -1 => Self::chi(r),
            j => {
                let s = 2f64.powi(j);
                Self::chi(r / (2.0 * s)) - Self::chi(r / s)
            }
        }
    }

    /// Symbol of `S_{j-1} = Σ_{i ≤ j-2} Δ_i`, i.e. `χ(·/2^{j-1})` for `j ≥ 1`.
    pub fn low_pass(j: i32, r: f64) -> f64 {
        if j <= 0 {
            0.0
        } else {
            Self::chi(r / 2f64.powi(j - 1))
        }
    }

    /// Smallest `J` such that blocks `-1..=J` cover every lattice frequency,
    /// including the corners of the frequency cube.
    pub fn j_max(grid: &TorusGrid) -> i32 {
        let corner = (grid.dim() as f64).sqrt() * grid.nyquist();
        let mut j = -1;
        while 2f64.powi(j + 1) < corner {
            j += 1;
        }
        j
    }

    /// First block whose support extends past the axis Nyquist frequency.
    /// Blocks from here up to `j_max` are only partially represented.
    pub fn first_partial_block(grid: &TorusGrid) -> i32 {
        let nyq = grid.nyquist();
        let mut j = -1;
        while j < Self::j_max(grid) && Self::upper_edge(j) <= nyq {
            j += 1;
        }
        j
    }

    /// Frequency beyond which `φ_j` vanishes.
    pub fn upper_edge(j: i32) -> f64 {
        2f64.powi(j + 1) * Self::TRANSITION
    }

    /// Frequency below which `φ_j` vanishes (`j ≥ 0`).
    pub fn lower_edge(j: i32) -> f64 {
        if j < 0 {
            0.0
        } else {
            2f64.powi(j)
        }
    }

    pub fn check_block(grid: &TorusGrid, j: i32) -> Result<()> {
        let j_max = Self::j_max(grid);
        if j < -1 || j > j_max {
            return Err(Error::BlockOutOfRange { requested: j, j_max });
        }
        Ok(())
    }
}

/// Index triple `(s, p, q)` of a Besov space `B^s_{p,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovIndex {
    pub s: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovIndex {
    pub fn new(s: f64, p: f64, q: f64) -> Result<Self> {
        let ok = |x: f64| x >= 1.0 && !x.is_nan();
        if !s.is_finite() || !ok(p) || !ok(q) {
            return Err(Error::param(format!(
                "Besov index needs finite s and p, q in [1, inf]; got s={s}, p={p}, q={q}"
            )));
        }
        Ok(Self { s, p, q })
    }

    pub fn with_s(self, s: f64) -> Self {
        Self { s, ..self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_shape() {
        assert_eq!(DyadicPartition::chi(0.0), 1.0);
        assert_eq!(DyadicPartition::chi(1.0), 1.0);
        assert_eq!(DyadicPartition::chi(4.0 / 3.0), 0.0);
        assert_eq!(DyadicPartition::chi(5.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = DyadicPartition::chi(1.0 + i as f64 / 300.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn partition_of_unity_on_lattice() {
        for (dim, n, l) in [(2, 64, 1.0), (3, 16, 2.0), (2, 32, 50.0)] {
            let g = TorusGrid::new(dim, n, l).unwrap();
            let jm = DyadicPartition::j_max(&g);
            for m in g.modes() {
                let s: f64 = (-1..=jm).map(|j| DyadicPartition::phi(j, m.norm())).sum();
                assert!((s - 1.0).abs() <= 1e-12, "sum {s} at |ξ| = {}", m.norm());
            }
        }
    }

    #[test]
    fn block_support_bounds() {
        let g = TorusGrid::new(2, 64, 1.0).unwrap();
        for j in 0..=DyadicPartition::j_max(&g) {
            let lo = 2f64.powi(j) / 2.0;
            let hi = 2f64.powi(j) * 8.0 / 3.0;
            for m in g.modes() {
                let r = m.norm();
                if r <= lo || r >= hi {
                    assert_eq!(DyadicPartition::phi(j, r), 0.0);
                }
            }
        }
    }

    #[test]
    fn low_pass_is_cumulative_block_sum() {
        for r in [0.0, 0.7, 1.1, 2.5, 7.9, 40.0] {
            for j in -1..8 {
                let cum: f64 = (-1..=j - 2).map(|i| DyadicPartition::phi(i, r)).sum();
                assert!((cum - DyadicPartition::low_pass(j, r)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn j_max_covers_corner() {
        let g = TorusGrid::new(2, 256, 1.0).unwrap();
        let jm = DyadicPartition::j_max(&g);
        let corner = 2f64.sqrt() * g.nyquist();
        assert!(2f64.powi(jm + 1) >= corner && 2f64.powi(jm) < corner);
        assert!(DyadicPartition::check_block(&g, jm + 1).is_err());
        assert!(DyadicPartition::first_partial_block(&g) <= jm);
    }

    #[test]
    fn index_validation() {
        assert!(BesovIndex::new(0.0, 2.0, f64::INFINITY).is_ok());
        assert!(BesovIndex::new(0.0, 0.5, 1.0).is_err());
        assert!(BesovIndex::new(f64::NAN, 2.0, 1.0).is_err());
    }
}
