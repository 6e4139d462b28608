//! Periodic-torus discretization.
//!
//! Fourier convention: for a field `u` sampled on `N^d` points of `[0, L)^d`,
//! the coefficients are
//!
//! ```text
//! c_k = N^{-d} Σ_x u(x) exp(-i ξ_k · x),      ξ_k = 2π k / L,  k ∈ [-N/2, N/2)^d
//! u(x) = Σ_k c_k exp(i ξ_k · x)
//! ```
//!
//! so a constant field has `c_0` equal to the constant and Parseval reads
//! `Σ_x |u(x)|² h^d = L^d Σ_k |c_k|²`.

mod fft;
mod field;
mod grid;
mod ops;
mod snapshot;
mod trig;

pub use fft::{forward, inverse};
pub use field::{ScalarField, VectorField};
pub use grid::{Mode, TorusGrid};
pub use ops::{
    apply_multiplier, band_limit, dealias, divergence, evaluate, gradient, h1_norm, laplacian,
    lp_norm, upsample, EvalMode, FrequencySymbol,
};
pub(crate) use ops::{dealias_cutoff, map_modes, multilinear};
pub use trig::{TrigMode, TrigPolynomial};
pub use snapshot::{read_field, read_field_from, write_field, write_field_to, FIELD_MAGIC};
