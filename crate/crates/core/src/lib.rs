//! Numerical laboratory for SDEs driven by divergence-free distributional
//! drifts `b = ∇·A` on a periodic torus.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: torus grids, FFT-backed fields, Fourier multipliers and
//!   point evaluation.
//! * [`besov`]: Littlewood–Paley blocks, Besov norms, mollifiers and Bony
//!   paraproducts.
//! * [`drift`]: antisymmetric potentials, synthetic drifts, singular sets,
//!   cutoffs and parameter condition reports.
//! * [`sde`]: Euler–Maruyama ensembles with per-path counter-based RNG streams
//!   and the pathwise statistics built on them.
//! * [`kbe`]: a pseudo-spectral Kolmogorov backward solver used as a
//!   deterministic expectation oracle.
//! * [`experiments`]: weak-rate, singularity and diagnostic experiments plus
//!   config ingestion and reporting.
//!
//! Ensemble and scan loops run on rayon when the `parallel` feature is on
//! (the default) and fall back to plain iterators otherwise. Results are
//! bit-identical either way.

pub mod besov;
pub mod drift;
pub mod error;
pub mod experiments;
pub mod kbe;
pub mod par;
pub mod sde;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
