use serde::Serialize;

use super::{besov_norm, besov_norm_vector, lp_blocks, BesovIndex, DyadicPartition};
use crate::spectral::{divergence, gradient, h1_norm, map_modes, ScalarField, VectorField};
use crate::{Error, Result};

fn low_pass(u: &ScalarField, j: i32) -> ScalarField {
    map_modes(u, |m| DyadicPartition::low_pass(j, m.norm()))
}

#[cfg(test)]
fn product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.zip_with(b, |x, y| x * y).expect("shared grid")
}

fn add_into(acc: &mut [f64], a: &ScalarField, b: &ScalarField) {
    for ((s, x), y) in acc.iter_mut().zip(a.values()).zip(b.values()) {
        *s += x * y;
    }
}

/// `b ≺ v = Σ_j S_{j−1} b · Δ_j v`.
pub fn para_lt(b: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    b.check_grid(v)?;
    let blocks = lp_blocks(v);
    let mut acc = vec![0.0; b.grid().len()];
    for (i, dv) in blocks.iter().enumerate() {
        let j = i as i32 - 1;
        if j >= 1 {
            add_into(&mut acc, &low_pass(b, j), dv);
        }
    }
    ScalarField::new(*b.grid(), acc)
}

/// `b ≻ v = v ≺ b`.
pub fn para_gt(b: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    para_lt(v, b)
}

/// `b ⊙ v = Σ_{|i−j| ≤ 1} Δ_i b · Δ_j v`.
pub fn resonant(b: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    b.check_grid(v)?;
    let bb = lp_blocks(b);
    let vb = lp_blocks(v);
    let mut acc = vec![0.0; b.grid().len()];
    for i in 0..bb.len() {
        for j in i.saturating_sub(1)..(i + 2).min(vb.len()) {
            add_into(&mut acc, &bb[i], &vb[j]);
        }
    }
    ScalarField::new(*b.grid(), acc)
}

/// Open interval of integrability exponents `r` for which the drift bound
/// `‖b·∇u‖_{B^{−1}_{r,2}} ≲ ‖b‖_{B^{−γ}_{p,∞}} ‖u‖_{L^∞ ∩ H¹}` applies.
pub fn admissible_interval(p: f64, gamma: f64) -> (f64, f64) {
    (2.0 * p / (p + 2.0), 2.0 * p / (p * gamma + 2.0))
}

/// Paraproduct form of `b·∇u` together with the measured bound ratio.
#[derive(Debug, Clone, Serialize)]
pub struct DriftProduct {
    #[serde(skip)]
    pub field: ScalarField,
    /// `‖b·∇u‖_{B^{−1}_{r,2}}`
    pub lhs: f64,
    /// `‖b‖_{B^{−γ}_{p,∞}}`
    pub drift_norm: f64,
    /// `max{‖u‖_∞, ‖u‖_{H¹}}`
    pub u_norm: f64,
    pub ratio: f64,
}

/// `b ≺ ∇u + b ≻ ∇u + ∇·(b ⊙ u)` for a divergence-free `b`.
pub fn drift_product(
    b: &VectorField,
    u: &ScalarField,
    gamma: f64,
    p: f64,
    r: f64,
) -> Result<DriftProduct> {
    let (low, high) = admissible_interval(p, gamma);
    if !(r > low && r < high) {
        return Err(Error::Inadmissible { r, low, high });
    }
    b.component(0).check_grid(u)?;
    let div = divergence(b).l2_norm();
    if div > 1e-8 * b.l2_norm() {
        return Err(Error::param(format!(
            "drift not divergence-free: ‖∇·b‖ = {div:.3e}, ‖b‖ = {:.3e}",
            b.l2_norm()
        )));
    }
    let grad = gradient(u);
    let grid = *u.grid();
    let mut acc = ScalarField::zeros(grid);
    let mut res = Vec::with_capacity(grid.dim());
    for (bi, gi) in b.components().iter().zip(grad.components()) {
        acc = &acc + &para_lt(bi, gi)?;
        acc = &acc + &para_gt(bi, gi)?;
        res.push(resonant(bi, u)?);
    }
    acc = &acc + &divergence(&VectorField::new(res)?);
    let lhs = besov_norm(&acc, &BesovIndex::new(-1.0, r, 2.0)?).value;
    let drift_norm = besov_norm_vector(b, &BesovIndex::new(-gamma, p, f64::INFINITY)?).value;
    let u_norm = u.max_abs().max(h1_norm(u));
    Ok(DriftProduct {
        field: acc,
        lhs,
        drift_norm,
        u_norm,
        ratio: lhs / (drift_norm * u_norm),
    })
}

/// `‖u‖_{B^{2/q}_{q,∞}} / max{‖u‖_{L^∞}, ‖u‖_{H¹}}`, or `None` when the
/// denominator vanishes.
pub fn interpolation_bound_check(u: &ScalarField, q: f64) -> Result<Option<f64>> {
    if !(q > 2.0 && q.is_finite()) {
        return Err(Error::param(format!("q must lie in (2, inf), got {q}")));
    }
    let den = u.max_abs().max(h1_norm(u));
    if den == 0.0 {
        return Ok(None);
    }
    let num = besov_norm(u, &BesovIndex::new(2.0 / q, q, f64::INFINITY)?).value;
    Ok(Some(num / den))
}

/// Sum of the three Bony pieces.
pub fn bony_sum(b: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    Ok(&(&para_lt(b, v)? + &para_gt(b, v)?) + &resonant(b, v)?)
}
