use num_complex::Complex64;
use serde::Serialize;

use super::{BesovIndex, DyadicPartition, Mollifier};
use crate::par::{map_indexed, Execution};
use crate::spectral::{inverse, ScalarField, TorusGrid, VectorField};
use crate::stats::{loglog_fit, LineFit};
use crate::{Error, Result};

/// Share of the total above which the top block flags truncation.
const TRUNCATION_SHARE: f64 = 0.01;

/// `Δ_j u`, the `j`-th Littlewood–Paley block.
pub fn lp_block(u: &ScalarField, j: i32) -> Result<ScalarField> {
    DyadicPartition::check_block(u.grid(), j)?;
    Ok(crate::spectral::map_modes(u, |m| DyadicPartition::phi(j, m.norm())))
}

/// All blocks `Δ_{-1} u, …, Δ_{j_max} u`.
pub fn lp_blocks(u: &ScalarField) -> Vec<ScalarField> {
    let jm = DyadicPartition::j_max(u.grid());
    let grid = *u.grid();
    let coeffs = u.coeffs();
    let radii = radii(&grid);
    map_indexed((jm + 2) as usize, Execution::default(), |i| {
        let j = i as i32 - 1;
        let c: Vec<Complex64> = coeffs
            .iter()
            .zip(&radii)
            .map(|(c, r)| c * DyadicPartition::phi(j, *r))
            .collect();
        ScalarField::new(grid, inverse(&grid, &c)).expect("finite block")
    })
}

fn radii(grid: &TorusGrid) -> Vec<f64> {
    (0..grid.len()).map(|i| grid.mode(i).norm()).collect()
}

fn raw_lp(grid: &TorusGrid, values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let scale = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = values.iter().map(|v| (v.abs() / scale).powf(p)).sum();
    scale * (s * grid.cell_volume()).powf(1.0 / p)
}

/// `‖Δ_j‖_{L^p}` of the field with Fourier coefficients `coeffs · weight(|ξ|)`,
/// where each entry of `coeffs` holds one vector component's coefficients.
fn block_norms(
    grid: &TorusGrid,
    coeffs: &[&[Complex64]],
    p: f64,
    weight: &(dyn Fn(f64) -> f64 + Sync),
) -> Vec<f64> {
    let jm = DyadicPartition::j_max(grid);
    let radii = radii(grid);
    map_indexed((jm + 2) as usize, Execution::default(), |i| {
        let j = i as i32 - 1;
        let mult: Vec<f64> = radii
            .iter()
            .map(|r| DyadicPartition::phi(j, *r) * weight(*r))
            .collect();
        if mult.iter().all(|m| *m == 0.0) {
            return 0.0;
        }
        let mut mag2 = vec![0.0; grid.len()];
        for comp in coeffs {
            let c: Vec<Complex64> = comp.iter().zip(&mult).map(|(c, m)| c * m).collect();
            for (acc, v) in mag2.iter_mut().zip(inverse(grid, &c)) {
                *acc += v * v;
            }
        }
        let mag: Vec<f64> = mag2.into_iter().map(f64::sqrt).collect();
        raw_lp(grid, &mag, p)
    })
}

/// Result of a truncated Besov norm evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct BesovNorm {
    pub value: f64,
    /// `‖Δ_j u‖_{L^p}` for `j = -1, …, j_max`.
    pub block_norms: Vec<f64>,
    /// Share of the sum carried by the partially resolved top blocks
    /// (ratio to the sup for `q = ∞`).
    pub top_share: f64,
    /// Set when the partially resolved blocks carry more than 1% of the norm.
    pub truncated: bool,
    pub j_max: i32,
    pub first_partial_block: i32,
}

impl BesovNorm {
    fn assemble(grid: &TorusGrid, block_norms: Vec<f64>, idx: &BesovIndex) -> Self {
        let weighted: Vec<f64> = block_norms
            .iter()
            .enumerate()
            .map(|(i, n)| 2f64.powf((i as f64 - 1.0) * idx.s) * n)
            .collect();
        let partial = (DyadicPartition::first_partial_block(grid) + 1).max(0) as usize;
        let top = weighted[partial.min(weighted.len())..]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let (value, top_share) = if idx.q.is_infinite() {
            let sup = weighted.iter().cloned().fold(0.0, f64::max);
            (sup, if sup > 0.0 { top / sup } else { 0.0 })
        } else {
            let scale = weighted.iter().cloned().fold(0.0, f64::max);
            if scale == 0.0 {
                (0.0, 0.0)
            } else {
                let sum: f64 = weighted.iter().map(|w| (w / scale).powf(idx.q)).sum();
                let share = weighted[partial.min(weighted.len())..]
                    .iter()
                    .map(|w| (w / scale).powf(idx.q))
                    .sum::<f64>()
                    / sum;
                (scale * sum.powf(1.0 / idx.q), share)
            }
        };
        Self {
            value,
            block_norms,
            top_share,
            truncated: top_share > TRUNCATION_SHARE,
            j_max: DyadicPartition::j_max(grid),
            first_partial_block: DyadicPartition::first_partial_block(grid),
        }
    }
}

/// `(Σ_j 2^{jsq} ‖Δ_j u‖^q_{L^p})^{1/q}`, truncated at `j_max`.
pub fn besov_norm(u: &ScalarField, idx: &BesovIndex) -> BesovNorm {
    let norms = block_norms(u.grid(), &[u.coeffs()], idx.p, &|_| 1.0);
    BesovNorm::assemble(u.grid(), norms, idx)
}

/// Besov norm of a vector field, taking `L^p` of the Euclidean magnitude of
/// each vector-valued block.
pub fn besov_norm_vector(b: &VectorField, idx: &BesovIndex) -> BesovNorm {
    let coeffs: Vec<&[Complex64]> = b.components().iter().map(|c| c.coeffs()).collect();
    let norms = block_norms(b.grid(), &coeffs, idx.p, &|_| 1.0);
    BesovNorm::assemble(b.grid(), norms, idx)
}

/// Values of a quantity across mollification levels with a log-log fit.
#[derive(Debug, Clone, Serialize)]
pub struct RateScan {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
    pub truncated: Vec<bool>,
    pub fit: LineFit,
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.len() < 3 {
        return Err(Error::param(format!(
            "rate scan needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if levels.iter().any(|n| !(n.is_finite() && *n > 0.0)) || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("levels must be positive and increasing"));
    }
    Ok(())
}

fn fit(levels: &[f64], values: &[f64]) -> Result<LineFit> {
    loglog_fit(levels, values).ok_or_else(|| Error::param("degenerate values in rate fit"))
}

/// `‖b − b^n‖_{B^{s−α}_{p,q}}` for each level with the fitted decay slope.
pub fn mollification_rate_scan(
    b: &ScalarField,
    idx: &BesovIndex,
    alpha: f64,
    levels: &[f64],
) -> Result<RateScan> {
    check_levels(levels)?;
    if !(alpha > 0.0) {
        return Err(Error::param(format!("alpha must be positive, got {alpha}")));
    }
    let grid = b.grid();
    let target = idx.with_s(idx.s - alpha);
    let mut values = Vec::with_capacity(levels.len());
    let mut truncated = Vec::with_capacity(levels.len());
    for &n in levels {
        let m = Mollifier::new(grid.dim(), n)?;
        let norms = block_norms(grid, &[b.coeffs()], target.p, &|r| 1.0 - m.multiplier(r));
        let norm = BesovNorm::assemble(grid, norms, &target);
        values.push(norm.value);
        truncated.push(norm.truncated);
    }
    let fit = fit(levels, &values)?;
    Ok(RateScan {
        levels: levels.to_vec(),
        values,
        truncated,
        fit,
    })
}

/// `‖δ₀ − ρ^n‖_{B^{−α}_{1,∞}} = sup_j 2^{−αj} ‖φ_j − ρ^n ∗ φ_j‖_{L¹}` on the
/// grid, where `φ_j` denotes the block kernel.
pub fn prep_identity_scan(grid: &TorusGrid, alpha: f64, levels: &[f64]) -> Result<RateScan> {
    check_levels(levels)?;
    let delta = vec![Complex64::new(1.0 / grid.volume(), 0.0); grid.len()];
    let idx = BesovIndex::new(-alpha, 1.0, f64::INFINITY)?;
    let mut values = Vec::new();
    let mut truncated = Vec::new();
    for &n in levels {
        let m = Mollifier::new(grid.dim(), n)?;
        let norms = block_norms(grid, &[&delta], 1.0, &|r| 1.0 - m.multiplier(r));
        let norm = BesovNorm::assemble(grid, norms, &idx);
        values.push(norm.value);
        truncated.push(norm.truncated);
    }
    let fit = fit(levels, &values)?;
    Ok(RateScan {
        levels: levels.to_vec(),
        values,
        truncated,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::mollify;
    use crate::spectral::band_limit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(g: TorusGrid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(g, (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn dyadic_single_mode_lands_in_adjacent_blocks() {
        // L = 2π so ξ = k; |ξ| = 8 = 2^3
        let g = TorusGrid::new(2, 32, 2.0 * PI).unwrap();
        let u = ScalarField::from_fn(g, |x| (8.0 * x[0]).cos()).unwrap();
        let mut sum = ScalarField::zeros(g);
        for j in -1..=DyadicPartition::j_max(&g) {
            let b = lp_block(&u, j).unwrap();
            if !(j == 2 || j == 3) {
                assert!(b.max_abs() < 1e-13, "block {j}");
            }
            sum = &sum + &b;
        }
        assert!((&sum - &u).max_abs() < 1e-12);
    }

    #[test]
    fn constant_lives_in_lowest_block() {
        let g = TorusGrid::new(3, 8, 1.0).unwrap();
        let u = ScalarField::constant(g, 2.0);
        let blocks = lp_blocks(&u);
        assert!((&blocks[0] - &u).max_abs() < 1e-14);
        assert!(blocks[1..].iter().all(|b| b.max_abs() < 1e-14));
    }

    #[test]
    fn blocks_reconstruct_random_fields() {
        for (d, n) in [(2, 16), (3, 16), (2, 64)] {
            let g = TorusGrid::new(d, n, 1.0).unwrap();
            let u = random(g, n as u64);
            let sum = lp_blocks(&u).iter().fold(ScalarField::zeros(g), |a, b| &a + b);
            assert!((&sum - &u).max_abs() < 1e-10);
        }
    }

    #[test]
    fn out_of_range_block_reports_j_max() {
        let g = TorusGrid::new(2, 16, 1.0).unwrap();
        let u = ScalarField::zeros(g);
        let jm = DyadicPartition::j_max(&g);
        match lp_block(&u, jm + 1) {
            Err(Error::BlockOutOfRange { j_max, .. }) => assert_eq!(j_max, jm),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn separated_blocks_are_orthogonal() {
        let g = TorusGrid::new(2, 64, 1.0).unwrap();
        let u = random(g, 1);
        let jm = DyadicPartition::j_max(&g);
        for j in -1..=jm {
            let bj = lp_block(&u, j).unwrap();
            for i in -1..=jm {
                if (i - j).abs() >= 2 {
                    assert!(lp_block(&bj, i).unwrap().max_abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = TorusGrid::new(2, 16, 1.0).unwrap();
        let idx = BesovIndex::new(-0.5, 2.0, 2.0).unwrap();
        assert_eq!(besov_norm(&ScalarField::zeros(g), &idx).value, 0.0);
    }

    #[test]
    fn single_mode_norm_is_analytic() {
        let l = 2.0 * PI;
        let g = TorusGrid::new(2, 64, l).unwrap();
        // |ξ₀| = 5 sits in the transition of blocks 1 and 2
        let xi0 = [3.0, 4.0];
        let u = ScalarField::from_fn(g, |x| (xi0[0] * x[0] + xi0[1] * x[1]).cos()).unwrap();
        for (s, p, q) in [(-0.3, 2.0, 2.0), (0.5, 4.0, 1.0), (-1.0, 3.0, f64::INFINITY)] {
            let idx = BesovIndex::new(s, p, q).unwrap();
            let cos_lp = crate::spectral::lp_norm(&u, p).unwrap();
            let terms: Vec<f64> = (-1..=DyadicPartition::j_max(&g))
                .map(|j| 2f64.powf(j as f64 * s) * DyadicPartition::phi(j, 5.0))
                .collect();
            let expect = if q.is_infinite() {
                terms.iter().cloned().fold(0.0, f64::max)
            } else {
                terms.iter().map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
            } * cos_lp;
            let got = besov_norm(&u, &idx).value;
            assert!((got - expect).abs() < 1e-10 * expect, "{got} vs {expect}");
        }
    }

    #[test]
    fn truncation_flag_tracks_top_block() {
        let g = TorusGrid::new(2, 32, 1.0).unwrap();
        let idx = BesovIndex::new(0.0, 2.0, 2.0).unwrap();
        let rough = besov_norm(&random(g, 4), &idx);
        assert!(rough.truncated);
        let smooth = besov_norm(&band_limit(&random(g, 4), 2), &idx);
        assert!(!smooth.truncated && smooth.top_share < 1e-12);
    }

    #[test]
    fn vector_norm_of_single_component_matches_scalar() {
        let g = TorusGrid::new(2, 32, 1.0).unwrap();
        let u = random(g, 9);
        let v = VectorField::new(vec![u.clone(), ScalarField::zeros(g)]).unwrap();
        let idx = BesovIndex::new(-0.2, 8.0, f64::INFINITY).unwrap();
        let a = besov_norm(&u, &idx).value;
        let b = besov_norm_vector(&v, &idx).value;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn single_mode_rate_matches_multiplier() {
        let l = 2.0 * PI;
        let g = TorusGrid::new(2, 64, l).unwrap();
        let u = ScalarField::from_fn(g, |x| (16.0 * x[0]).cos()).unwrap();
        let idx = BesovIndex::new(0.0, 2.0, 2.0).unwrap();
        let levels = [2.0, 4.0, 8.0, 16.0];
        let scan = mollification_rate_scan(&u, &idx, 0.5, &levels).unwrap();
        let cos_l2 = l / 2f64.sqrt();
        for (n, v) in levels.iter().zip(&scan.values) {
            let factor = 1.0 - Mollifier::new(2, *n).unwrap().multiplier(16.0);
            // |ξ₀| = 16 = 2^4 lies only in block 3
            let expect = factor.abs() * 2f64.powf(3.0 * -0.5) * cos_l2;
            assert!((v - expect).abs() < 1e-10 * expect.max(1e-300), "n={n}");
            let direct = (&u - &mollify(&u, &Mollifier::new(2, *n).unwrap())).l2_norm();
            assert!((direct - factor.abs() * cos_l2).abs() < 1e-10);
        }
    }

    #[test]
    fn band_limited_rate_is_steep() {
        let g = TorusGrid::new(2, 64, 1.0).unwrap();
        let u = band_limit(&random(g, 6), 3);
        let idx = BesovIndex::new(0.0, 2.0, f64::INFINITY).unwrap();
        let scan = mollification_rate_scan(&u, &idx, 0.5, &[4.0, 8.0, 16.0, 32.0]).unwrap();
        assert!(scan.fit.slope < -1.5, "slope {}", scan.fit.slope);
    }

    #[test]
    fn rate_scan_needs_three_levels() {
        let g = TorusGrid::new(2, 16, 1.0).unwrap();
        let idx = BesovIndex::new(0.0, 2.0, 2.0).unwrap();
        assert!(mollification_rate_scan(&random(g, 1), &idx, 0.5, &[2.0, 4.0]).is_err());
    }

    #[test]
    fn prep_identity_decays_like_n_to_minus_alpha() {
        // L = 4 keeps the maximizing blocks well sampled on the lattice
        let g = TorusGrid::new(2, 256, 4.0).unwrap();
        let scan = prep_identity_scan(&g, 0.5, &[4.0, 8.0, 16.0, 32.0]).unwrap();
        assert!((scan.fit.slope + 0.5).abs() <= 0.15, "slope {}", scan.fit.slope);
    }
}
