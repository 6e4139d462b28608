use num_complex::Complex64;
use serde::Serialize;

use super::solver::{propagate, KbeOperator, KbeRun, Scheme};
use crate::drift::{drift, AntisymmetricField};
use crate::par::{map_indexed, Execution};
use crate::sde::InitialDensity;
use crate::spectral::{dealias, divergence, gradient, ScalarField, VectorField};
use crate::{Error, Result};

/// Pairwise relative `L²` residuals between `b·∇u`, `∇·(bu)` and `∇·(A∇u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub advective_vs_conservative: f64,
    pub advective_vs_potential: f64,
    pub conservative_vs_potential: f64,
    /// Common scale used for the relative residuals.
    pub scale: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.advective_vs_conservative
            .max(self.advective_vs_potential)
            .max(self.conservative_vs_potential)
    }
}

/// Product of two fields truncated to the two-thirds band.
fn product(a: &[f64], b: &[f64], like: &ScalarField) -> ScalarField {
    let grid = *like.grid();
    let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    dealias(&ScalarField::new(grid, v).expect("finite product"))
}

/// Evaluates the three forms of the transport term on dealiased inputs.
pub fn identity_check(a: &AntisymmetricField, u: &ScalarField) -> Result<IdentityResiduals> {
    if a.grid() != u.grid() {
        return Err(Error::GridMismatch("potential and field grids differ".into()));
    }
    let a = a.map(|c| Ok(dealias(c)))?;
    let u = dealias(u);
    let grid = *u.grid();
    let d = grid.dim();
    let b = drift(&a);
    let gu = gradient(&u);

    let mut adv = vec![0.0; grid.len()];
    for i in 0..d {
        for (o, (x, y)) in adv
            .iter_mut()
            .zip(b.component(i).values().iter().zip(gu.component(i).values()))
        {
            *o += x * y;
        }
    }
    let adv = dealias(&ScalarField::new(grid, adv)?);

    let bu: Vec<ScalarField> = (0..d)
        .map(|i| product(b.component(i).values(), u.values(), &u))
        .collect();
    let cons = divergence(&VectorField::new(bu)?);

    let agu: Vec<ScalarField> = (0..d)
        .map(|i| {
            let v: Vec<f64> = (0..grid.len())
                .map(|idx| (0..d).map(|j| a.entry(i, j, idx) * gu.component(j).values()[idx]).sum())
                .collect();
            dealias(&ScalarField::new(grid, v).expect("finite"))
        })
        .collect();
    let pot = divergence(&VectorField::new(agu)?);

    let scale = b.l2_norm() * gu.l2_norm() / grid.volume().sqrt();
    let rel = |x: &ScalarField, y: &ScalarField| {
        let r = (x - y).l2_norm();
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    };
    Ok(IdentityResiduals {
        advective_vs_conservative: rel(&adv, &cons),
        advective_vs_potential: rel(&adv, &pot),
        conservative_vs_potential: rel(&cons, &pot),
        scale,
    })
}

/// `E[f(X_t)] = ⟨η, v(t)⟩` using the stored slice at `t`.
pub fn expectation_oracle(run: &KbeRun, eta: &InitialDensity, t: f64) -> Result<f64> {
    eta.expectation(run.slice(t)?)
}

/// Energy table with the dissipation identity checked step by step.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyBudget {
    pub rows: Vec<super::BudgetRow>,
    /// `max_k |ΔE_k + 2∫‖∇v‖²| / (dt·‖v0‖²)`.
    pub max_residual_rate: f64,
    pub sup_initial: f64,
    pub sup_max: f64,
    pub max_principle_ok: bool,
    /// Relative antisymmetry defect of the transport term.
    pub transport_defect: f64,
    /// `(∫_0^T ‖v‖²_{H¹} dt)^{1/2}`.
    pub l2_h1: f64,
}

pub fn energy_budget(run: &KbeRun) -> EnergyBudget {
    let rows = run.budget.clone();
    let e0 = rows[0].l2_sq;
    let mut worst: f64 = 0.0;
    for w in rows.windows(2) {
        let r = (w[1].l2_sq - w[0].l2_sq + 2.0 * w[1].dissipation).abs();
        if e0 > 0.0 {
            worst = worst.max(r / (run.dt * e0));
        }
    }
    let sup_initial = rows[0].sup;
    let sup_max = rows.iter().map(|r| r.sup).fold(0.0, f64::max);
    let l2_h1 = rows[1..]
        .iter()
        .map(|r| r.mass + r.dissipation)
        .sum::<f64>()
        .sqrt();
    EnergyBudget {
        max_residual_rate: worst,
        max_principle_ok: sup_max <= sup_initial * (1.0 + 1e-6) + 1e-12,
        sup_initial,
        sup_max,
        transport_defect: run.max_transport_defect,
        l2_h1,
        rows,
    }
}

/// Both sides of `P^m_t f − P^n_t f = ∫_0^t P^n_{t−s}(b^m − b^n)·∇P^m_s f ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DuhamelDefect {
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    /// `‖lhs − rhs‖/‖lhs‖` (absolute when the left side vanishes).
    pub mismatch: f64,
    pub nodes: usize,
}

/// Trapezoid rule over `nodes` equal subintervals of `[0, t]`; each node
/// costs one solve at level `n`.
pub fn duhamel_defect(
    am: &AntisymmetricField,
    an: &AntisymmetricField,
    f: &ScalarField,
    t: f64,
    nodes: usize,
    dt: f64,
    exec: Execution,
) -> Result<DuhamelDefect> {
    if nodes == 0 {
        return Err(Error::param("need at least one quadrature node"));
    }
    let opm = KbeOperator::from_potential(am);
    let opn = KbeOperator::from_potential(an);
    let gate = opm.max_dt().min(opn.max_dt());
    if dt > gate {
        return Err(Error::StabilityGate { dt, required: gate });
    }
    let grid = *f.grid();
    let h = t / nodes as f64;
    let scheme = Scheme::IfRk4;
    let mut pm = Vec::with_capacity(nodes + 1);
    let mut c = f.coeffs().to_vec();
    opm.project(&mut c);
    pm.push(c.clone());
    for _ in 0..nodes {
        c = propagate(&opm, &c, h, dt, scheme)?;
        pm.push(c.clone());
    }
    let mut pn = f.coeffs().to_vec();
    pn = propagate(&opn, &pn, t, dt, scheme)?;

    let diff = drift(am).sub(&drift(an))?;
    let diff_op = KbeOperator::from_drift(&diff);
    let terms: Vec<Result<Vec<Complex64>>> = map_indexed(nodes + 1, exec, |i| {
        let g = diff_op.transport(&pm[i]);
        let w = if i == 0 || i == nodes { 0.5 * h } else { h };
        let out = propagate(&opn, &g, t - i as f64 * h, dt, scheme)?;
        Ok(out.into_iter().map(|c| c * w).collect())
    });
    let mut rhs = vec![Complex64::default(); grid.len()];
    for term in terms {
        for (r, v) in rhs.iter_mut().zip(term?) {
            *r += v;
        }
    }
    let lhs: Vec<Complex64> = pm[nodes].iter().zip(&pn).map(|(a, b)| a - b).collect();
    let norm = |c: &[Complex64]| (grid.volume() * c.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
    let err: Vec<Complex64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let (ln, rn, en) = (norm(&lhs), norm(&rhs), norm(&err));
    Ok(DuhamelDefect {
        lhs_norm: ln,
        rhs_norm: rn,
        mismatch: if ln > 0.0 { en / ln } else { en },
        nodes,
    })
}
