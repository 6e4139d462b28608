//! Antisymmetric potentials, divergence-free drifts, singular sets and
//! cutoffs, and the parameter conditions of the theory.

mod potential;
mod report;
mod singular;
mod synth;

pub use potential::{drift, AntisymmetricField};
pub use report::{
    condition_report, eta_threshold, static_point_admissible, ConditionReport, Criticality,
    DriftKind, DriftSpec, GridSpec, Verdict,
};
pub use singular::{
    apply_cutoff, cutoff, measure_exponent, neighborhood_measure, CutoffFamily, MeasureMode,
    NeighborhoodMeasure, Primitive, SingularSet,
};
pub use synth::{synth_random_besov, synth_vortex, vortex_stream, SynthResult, VortexResult};
