use serde::{Deserialize, Serialize};

use super::{synth_random_besov, vortex_stream, AntisymmetricField, Primitive, SingularSet};
use crate::besov::BesovIndex;
use crate::spectral::{band_limit, ScalarField, TorusGrid, TrigMode, TrigPolynomial};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.d, self.n, self.l)
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    Zero,
    /// Gaussian potential of regularity `s` (default `1 − γ`).
    RandomBesov {
        #[serde(default)]
        s: Option<f64>,
        seed: u64,
        #[serde(default = "one")]
        amplitude: f64,
        /// Keep only integer modes with `|k|_∞ ≤ band`.
        #[serde(default)]
        band: Option<i32>,
    },
    Vortex {
        lambda: f64,
        center: Vec<f64>,
        cutoff_radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Stream function (d = 2) or first potential component (d = 3) given
    /// as a finite cosine series.
    Modes { modes: Vec<TrigMode> },
    Superposition { parts: Vec<DriftKind> },
}

/// Drift description with the integrability and regularity parameters used
/// by the condition checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    #[serde(flatten)]
    pub kind: DriftKind,
    pub gamma: f64,
    pub p: f64,
    /// Time integrability; absent means `∞` (time-independent drift).
    #[serde(default)]
    pub q: Option<f64>,
    pub grid: GridSpec,
    #[serde(default, rename = "K")]
    pub singular: Vec<Primitive>,
}

impl DriftSpec {
    pub fn q(&self) -> f64 {
        self.q.unwrap_or(f64::INFINITY)
    }

    pub fn singular_set(&self) -> SingularSet {
        SingularSet {
            primitives: self.singular.clone(),
        }
    }

    pub fn build(&self) -> Result<AntisymmetricField> {
        let grid = self.grid.build()?;
        self.build_on(&grid)
    }

    /// Builds the potential on an arbitrary grid (e.g. a refinement).
    pub fn build_on(&self, grid: &TorusGrid) -> Result<AntisymmetricField> {
        build_kind(&self.kind, grid, self)
    }
}

fn build_kind(kind: &DriftKind, grid: &TorusGrid, spec: &DriftSpec) -> Result<AntisymmetricField> {
    match kind {
        DriftKind::Zero => Ok(AntisymmetricField::zeros(*grid)),
        DriftKind::RandomBesov { s, seed, amplitude, band } => {
            let s = s.unwrap_or(1.0 - spec.gamma);
            let idx = BesovIndex::new(s, spec.p.max(1.0), f64::INFINITY)?;
            let a = synth_random_besov(grid, &idx, *seed, *amplitude)?.field;
            match band {
                Some(b) => a.map(|c| Ok(band_limit(c, *b))),
                None => Ok(a),
            }
        }
        DriftKind::Vortex { lambda, center, cutoff_radius, amplitude } => {
            if grid.dim() != 2 || center.len() != 2 {
                return Err(Error::config("center", "vortex drift is two-dimensional"));
            }
            let a = vortex_stream(grid, *lambda, center, *cutoff_radius)?.scale(*amplitude);
            AntisymmetricField::stream(a)
        }
        DriftKind::Modes { modes } => {
            let f = TrigPolynomial {
                constant: 0.0,
                modes: modes.clone(),
            }
            .sample(grid)?;
            match grid.dim() {
                2 => AntisymmetricField::stream(f),
                _ => AntisymmetricField::potential([f, ScalarField::zeros(*grid), ScalarField::zeros(*grid)]),
            }
        }
        DriftKind::Superposition { parts } => {
            let mut acc = AntisymmetricField::zeros(*grid);
            for p in parts {
                acc = acc.add(&build_kind(p, grid, spec)?)?;
            }
            Ok(acc)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supercritical,
    Critical,
    Subcritical,
}

#[derive(Debug, Clone, Serialize)]
pub struct Criticality {
    /// `d/(1−γ)`
    pub threshold: f64,
    /// `p − d/(1−γ)`
    pub margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub d: usize,
    pub gamma: f64,
    pub p: f64,
    /// `None` encodes `q = ∞`.
    pub q: Option<f64>,
    /// `p(1/2 − 1/q)`
    pub excond_value: f64,
    pub excond_holds: bool,
    pub criticality: Criticality,
    /// `1/2 − 1/q − 1/p`
    pub alpha: f64,
    /// Hölder exponent bound `(p/2 − 1)/p` for time-independent `A ∈ L^p`.
    pub holder_bound: f64,
    /// `1 − 2/p − γ`
    pub beta_max: f64,
    /// Rate theorem requires `p > 2/(1−γ)`.
    pub rate_applicable: bool,
    /// `q_η` threshold at `β = 0`.
    pub eta_threshold_beta0: Option<f64>,
    /// `q_η` threshold as `β ↑ β_max`.
    pub eta_threshold_beta_max: Option<f64>,
    /// A static point singularity needs `1/α < d`.
    pub static_point_admissible: bool,
    pub in_theory: bool,
    pub violations: Vec<String>,
}

/// `q_η > 2p/((2−β−γ)p − 2)`; `None` when the denominator is not positive.
pub fn eta_threshold(p: f64, gamma: f64, beta: f64) -> Option<f64> {
    let den = (2.0 - beta - gamma) * p - 2.0;
    (den > 0.0).then(|| 2.0 * p / den)
}

/// Whether a time-independent point singularity satisfies the neighborhood
/// measure hypothesis: `Leb(B_ε) ∼ ε^d` must beat `ε^{1/α}`.
pub fn static_point_admissible(alpha: f64, d: usize) -> bool {
    alpha > 0.0 && 1.0 / alpha < d as f64
}

pub fn condition_report(spec: &DriftSpec, d: usize) -> ConditionReport {
    let (gamma, p, q) = (spec.gamma, spec.p, spec.q());
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let excond_value = p * (0.5 - inv(q));
    let threshold = d as f64 / (1.0 - gamma);
    let margin = p - threshold;
    let verdict = if margin.abs() <= 1e-12 * threshold {
        Verdict::Critical
    } else if margin < 0.0 {
        Verdict::Supercritical
    } else {
        Verdict::Subcritical
    };
    let alpha = 0.5 - inv(q) - inv(p);
    let beta_max = 1.0 - 2.0 / p - gamma;
    let rate_applicable = p > 2.0 / (1.0 - gamma) && gamma >= 0.0 && gamma < 1.0;
    let mut violations = Vec::new();
    if excond_value <= 1.0 {
        violations.push(format!("p(1/2 - 1/q) = {excond_value} <= 1"));
    }
    if !rate_applicable {
        violations.push(format!("rate needs p > 2/(1-gamma) = {}", 2.0 / (1.0 - gamma)));
    }
    if !(0.0..1.0).contains(&gamma) {
        violations.push(format!("gamma = {gamma} outside [0, 1)"));
    }
    let point_ok = static_point_admissible(alpha, d);
    if !spec.singular.is_empty() && !point_ok {
        violations.push(format!(
            "singular set: 1/alpha = {} >= d = {d}, measure hypothesis fails for static points",
            1.0 / alpha
        ));
    }
    ConditionReport {
        d,
        gamma,
        p,
        q: spec.q,
        excond_value,
        excond_holds: excond_value > 1.0,
        criticality: Criticality { threshold, margin, verdict },
        alpha,
        holder_bound: (p / 2.0 - 1.0) / p,
        beta_max,
        rate_applicable,
        eta_threshold_beta0: eta_threshold(p, gamma, 0.0),
        eta_threshold_beta_max: eta_threshold(p, gamma, beta_max),
        static_point_admissible: point_ok,
        in_theory: violations.is_empty(),
        violations,
    }
}
