use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drift::{drift, AntisymmetricField};
use crate::par::pairwise_sum;
use crate::spectral::{dealias_cutoff, forward, inverse, ScalarField, TorusGrid, VectorField};
use super::budget::StepGrams;
use crate::{Error, Result};

/// Transport term and its time derivative at one state.
struct Transport {
    value: Vec<Complex64>,
    rate: Vec<Complex64>,
}

/// Time integrator for `∂_t v = Δv + b·∇v`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact diffusion factor around one explicit transport step.
    SemiImplicit,
    /// Half diffusion, classical RK4 transport, half diffusion.
    Strang,
    /// Integrating-factor RK4 (Lawson).
    #[default]
    IfRk4,
}

/// Spectral generator `Δ + P(b·∇)` on the two-thirds-rule subspace.
#[derive(Debug, Clone)]
pub struct KbeOperator {
    grid: TorusGrid,
    /// Masked drift samples.
    b: Vec<Vec<f64>>,
    xi: Vec<[f64; 3]>,
    lap: Vec<f64>,
    mask: Vec<bool>,
    max_drift: f64,
}

impl KbeOperator {
    pub fn from_potential(a: &AntisymmetricField) -> Self {
        Self::from_drift(&drift(a))
    }

    /// The drift is projected onto the dealiased band before use.
    pub fn from_drift(b: &VectorField) -> Self {
        let grid = *b.grid();
        let cut = dealias_cutoff(&grid);
        let modes: Vec<_> = (0..grid.len()).map(|i| grid.mode(i)).collect();
        let mask: Vec<bool> = modes.iter().map(|m| m.max_abs_k() <= cut).collect();
        let xi = modes.iter().map(|m| m.derivative_xi()).collect();
        let lap = modes
            .iter()
            .map(|m| -m.derivative_xi()[..m.dim].iter().map(|x| x * x).sum::<f64>())
            .collect();
        let comps: Vec<Vec<f64>> = b
            .components()
            .iter()
            .map(|c| {
                let masked: Vec<Complex64> = c
                    .coeffs()
                    .iter()
                    .zip(&mask)
                    .map(|(v, &keep)| if keep { *v } else { Complex64::default() })
                    .collect();
                inverse(&grid, &masked)
            })
            .collect();
        let max_drift = (0..grid.len())
            .map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Self {
            grid,
            b: comps,
            xi,
            lap,
            mask,
            max_drift,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn max_drift(&self) -> f64 {
        self.max_drift
    }

    /// CFL-type gate `dt ≤ 0.25·h/max|b|`.
    pub fn max_dt(&self) -> f64 {
        if self.max_drift == 0.0 {
            f64::INFINITY
        } else {
            0.25 * self.grid.spacing() / self.max_drift
        }
    }

    pub fn project(&self, c: &mut [Complex64]) {
        for (v, &keep) in c.iter_mut().zip(&self.mask) {
            if !keep {
                *v = Complex64::default();
            }
        }
    }

    /// Coefficients of `P(b·∇v)` from the coefficients of `v`.
    pub fn transport(&self, v: &[Complex64]) -> Vec<Complex64> {
        let d = self.grid.dim();
        let mut prod = vec![0.0; self.grid.len()];
        for a in 0..d {
            let da: Vec<Complex64> = v
                .iter()
                .zip(&self.xi)
                .map(|(c, xi)| c * Complex64::new(0.0, xi[a]))
                .collect();
            let g = inverse(&self.grid, &da);
            for ((p, gi), bi) in prod.iter_mut().zip(&g).zip(&self.b[a]) {
                *p += gi * bi;
            }
        }
        let mut out = forward(&self.grid, &prod);
        self.project(&mut out);
        out
    }

    /// `P(b·∇v)` as a field.
    pub fn transport_field(&self, v: &ScalarField) -> Result<ScalarField> {
        self.check(v)?;
        let mut c = v.coeffs().to_vec();
        self.project(&mut c);
        ScalarField::from_coeffs(self.grid, &self.transport(&c))
    }

    fn check(&self, v: &ScalarField) -> Result<()> {
        if *v.grid() != self.grid {
            return Err(Error::GridMismatch("field and operator grids differ".into()));
        }
        Ok(())
    }

    fn heat(&self, c: &mut [Complex64], t: f64) {
        for (v, l) in c.iter_mut().zip(&self.lap) {
            *v *= (l * t).exp();
        }
    }

    fn rk4_transport(&self, v: &[Complex64], dt: f64) -> Vec<Complex64> {
        let k1 = self.transport(v);
        let s1: Vec<Complex64> = v.iter().zip(&k1).map(|(a, k)| a + k * (dt / 2.0)).collect();
        let k2 = self.transport(&s1);
        let s2: Vec<Complex64> = v.iter().zip(&k2).map(|(a, k)| a + k * (dt / 2.0)).collect();
        let k3 = self.transport(&s2);
        let s3: Vec<Complex64> = v.iter().zip(&k3).map(|(a, k)| a + k * dt).collect();
        let k4 = self.transport(&s3);
        (0..v.len())
            .map(|i| v[i] + (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) * (dt / 6.0))
            .collect()
    }

    /// One step of length `dt`.
    pub fn step(&self, v: &[Complex64], dt: f64, scheme: Scheme) -> Vec<Complex64> {
        self.step_from(v, &self.transport(v), dt, scheme)
    }

    /// One step given `tv = P(b·∇v)` at the current state.
    fn step_from(&self, v: &[Complex64], tv: &[Complex64], dt: f64, scheme: Scheme) -> Vec<Complex64> {
        match scheme {
            Scheme::SemiImplicit => {
                let mut out: Vec<Complex64> = v.iter().zip(tv).map(|(a, b)| a + b * dt).collect();
                self.heat(&mut out, dt);
                out
            }
            Scheme::Strang => {
                let mut w = v.to_vec();
                self.heat(&mut w, dt / 2.0);
                let mut out = self.rk4_transport(&w, dt);
                self.heat(&mut out, dt / 2.0);
                out
            }
            Scheme::IfRk4 => {
                let half: Vec<f64> = self.lap.iter().map(|l| (l * dt / 2.0).exp()).collect();
                let full: Vec<f64> = half.iter().map(|h| h * h).collect();
                let n = v.len();
                let k1: Vec<Complex64> = tv.iter().map(|c| c * dt).collect();
                let s1: Vec<Complex64> = (0..n).map(|i| (v[i] + k1[i] / 2.0) * half[i]).collect();
                let k2: Vec<Complex64> = self.transport(&s1).into_iter().map(|c| c * dt).collect();
                let s2: Vec<Complex64> = (0..n).map(|i| v[i] * half[i] + k2[i] / 2.0).collect();
                let k3: Vec<Complex64> = self.transport(&s2).into_iter().map(|c| c * dt).collect();
                let s3: Vec<Complex64> = (0..n).map(|i| v[i] * full[i] + k3[i] * half[i]).collect();
                let k4: Vec<Complex64> = self.transport(&s3).into_iter().map(|c| c * dt).collect();
                (0..n)
                    .map(|i| {
                        v[i] * full[i]
                            + (k1[i] * full[i] + (k2[i] + k3[i]) * (2.0 * half[i]) + k4[i]) / 6.0
                    })
                    .collect()
            }
        }
    }

    /// `(‖v‖²_{L²}, ‖∇v‖²_{L²})` by Parseval.
    pub fn energies(&self, v: &[Complex64]) -> (f64, f64) {
        let vol = self.grid.volume();
        let e: Vec<f64> = v.iter().map(|c| c.norm_sqr()).collect();
        let g: Vec<f64> = v.iter().zip(&self.lap).map(|(c, l)| -l * c.norm_sqr()).collect();
        (vol * pairwise_sum(&e), vol * pairwise_sum(&g))
    }

    /// `P(b·∇v')` with `v' = Δv + P(b·∇v)`, the time derivative of the
    /// transport term along the flow.
    fn transport_rate(&self, v: &[Complex64], tv: &[Complex64]) -> Vec<Complex64> {
        let dv: Vec<Complex64> = v.iter().zip(tv).zip(&self.lap).map(|((c, t), l)| c * l + t).collect();
        self.transport(&dv)
    }

    /// `∫_0^dt ‖∇v‖²` and `∫_0^dt ‖v‖²` over one step, exact for pure diffusion.
    fn step_integrals(&self, grams: &StepGrams, v: &[Complex64], ends: [&Transport; 2], dt: f64) -> (f64, f64) {
        let vol = self.grid.volume();
        let mut grad = Vec::with_capacity(v.len());
        let mut mass = Vec::with_capacity(v.len());
        for i in 0..v.len() {
            let int = grams.mode_integral(
                i,
                v[i],
                [ends[0].value[i], ends[1].value[i]],
                [ends[0].rate[i], ends[1].rate[i]],
                dt,
            );
            grad.push(-self.lap[i] * int);
            mass.push(int);
        }
        (vol * pairwise_sum(&grad), vol * pairwise_sum(&mass))
    }

    fn transport_pair(&self, v: &[Complex64]) -> Transport {
        let value = self.transport(v);
        let rate = self.transport_rate(v, &value);
        Transport { value, rate }
    }

    /// `2⟨P(b·∇v), v⟩` relative to `‖v‖²·max|b|·k_max`; zero for an
    /// antisymmetric transport.
    pub fn transport_defect(&self, v: &[Complex64]) -> f64 {
        self.defect_from(v, &self.transport(v))
    }

    fn defect_from(&self, v: &[Complex64], t: &[Complex64]) -> f64 {
        let vol = self.grid.volume();
        let s: Vec<f64> = t.iter().zip(v).map(|(a, b)| (a * b.conj()).re).collect();
        let (e, _) = self.energies(v);
        let scale = e * self.max_drift.max(1e-300) * self.grid.max_frequency();
        if e == 0.0 {
            0.0
        } else {
            2.0 * vol * pairwise_sum(&s) / scale
        }
    }
}

/// Solver options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KbeOptions {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    /// Times at which `v(t)` is stored; `0` and `T` are always stored.
    #[serde(default)]
    pub slices: Vec<f64>,
    #[serde(default)]
    pub scheme: Scheme,
}

impl KbeOptions {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            slices: vec![],
            scheme: Scheme::default(),
        }
    }

    pub fn with_slices(mut self, slices: Vec<f64>) -> Self {
        self.slices = slices;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }
}

/// One row of the energy table, at the end of a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetRow {
    pub t: f64,
    pub l2_sq: f64,
    pub grad_sq: f64,
    pub sup: f64,
    /// `∫‖∇v‖²` over the step that ended at `t`.
    pub dissipation: f64,
    /// `∫‖v‖²` over the same step.
    pub mass: f64,
}

/// Output of [`solve_kbe`].
#[derive(Debug, Clone)]
pub struct KbeRun {
    pub grid: TorusGrid,
    pub scheme: Scheme,
    pub dt: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub slices: Vec<ScalarField>,
    pub budget: Vec<BudgetRow>,
    pub max_drift: f64,
    /// `‖v0 − Pv0‖/‖v0‖` for the two-thirds projection `P`.
    pub truncation: f64,
    pub max_transport_defect: f64,
}

impl KbeRun {
    fn index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * self.horizon.max(1.0))
    }

    pub fn slice(&self, t: f64) -> Result<&ScalarField> {
        self.index(t)
            .map(|i| &self.slices[i])
            .ok_or_else(|| Error::Missing(format!("no stored slice at t = {t}")))
    }

    pub fn last(&self) -> &ScalarField {
        self.slices.last().expect("run stores t = 0 and T")
    }
}

fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(span >= 0.0 && dt > 0.0) {
        return Err(Error::param(format!("need T >= 0 and dt > 0, got T={span}, dt={dt}")));
    }
    let s = span / dt;
    let r = s.round();
    if (s - r).abs() > 1e-8 * s.max(1.0) {
        return Err(Error::param(format!("T/dt = {s} is not an integer")));
    }
    Ok(r as usize)
}

/// Advances coefficients by `span` without bookkeeping.
pub(crate) fn propagate(
    op: &KbeOperator,
    v: &[Complex64],
    span: f64,
    dt: f64,
    scheme: Scheme,
) -> Result<Vec<Complex64>> {
    let steps = step_count(span, dt)?;
    let mut c = v.to_vec();
    op.project(&mut c);
    for _ in 0..steps {
        c = op.step(&c, dt, scheme);
    }
    Ok(c)
}

/// Solves `∂_t v = Δv + ∇·(A∇v)`, `v(0) = v0` on `[0, T]`.
pub fn solve_kbe(a: &AntisymmetricField, v0: &ScalarField, opts: &KbeOptions) -> Result<KbeRun> {
    solve_with(&KbeOperator::from_potential(a), v0, opts)
}

pub fn solve_with(op: &KbeOperator, v0: &ScalarField, opts: &KbeOptions) -> Result<KbeRun> {
    op.check(v0)?;
    let steps = step_count(opts.horizon, opts.dt)?;
    if opts.dt > op.max_dt() {
        return Err(Error::StabilityGate {
            dt: opts.dt,
            required: op.max_dt(),
        });
    }
    let mut want: Vec<usize> = vec![0, steps];
    for &t in &opts.slices {
        if !(0.0..=opts.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::param(format!("slice time {t} outside [0, {}]", opts.horizon)));
        }
        want.push(step_count(t, opts.dt)?);
    }
    want.sort_unstable();
    want.dedup();

    let grid = *op.grid();
    let mut c = v0.coeffs().to_vec();
    op.project(&mut c);
    let projected = ScalarField::from_coeffs(grid, &c)?;
    let norm0 = v0.l2_norm();
    let truncation = if norm0 > 0.0 {
        (v0 - &projected).l2_norm() / norm0
    } else {
        0.0
    };

    let row = |t: f64, c: &[Complex64], field: &ScalarField, diss: f64, mass: f64| {
        let (l2_sq, grad_sq) = op.energies(c);
        BudgetRow {
            t,
            l2_sq,
            grad_sq,
            sup: field.max_abs(),
            dissipation: diss,
            mass,
        }
    };
    let mut times = vec![];
    let mut slices = vec![];
    let mut budget = vec![row(0.0, &c, &projected, 0.0, 0.0)];
    let lambda: Vec<f64> = op.lap.iter().map(|l| -l).collect();
    let grams = StepGrams::new(&lambda, opts.dt);
    let mut tv = op.transport_pair(&c);
    let mut max_defect = op.defect_from(&c, &tv.value).abs();
    let mut next = 0;
    if want[0] == 0 {
        times.push(0.0);
        slices.push(projected);
        next = 1;
    }
    for k in 1..=steps {
        let nc = op.step_from(&c, &tv.value, opts.dt, opts.scheme);
        let ntv = op.transport_pair(&nc);
        let (diss, mass) = op.step_integrals(&grams, &c, [&tv, &ntv], opts.dt);
        c = nc;
        tv = ntv;
        let field = ScalarField::from_coeffs(grid, &c)?;
        let t = k as f64 * opts.dt;
        budget.push(row(t, &c, &field, diss, mass));
        max_defect = max_defect.max(op.defect_from(&c, &tv.value).abs());
        if next < want.len() && want[next] == k {
            times.push(t);
            slices.push(field);
            next += 1;
        }
    }
    Ok(KbeRun {
        grid,
        scheme: opts.scheme,
        dt: opts.dt,
        horizon: opts.horizon,
        times,
        slices,
        budget,
        max_drift: op.max_drift(),
        truncation,
        max_transport_defect: max_defect,
    })
}

