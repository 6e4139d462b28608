//! Littlewood–Paley blocks, Besov norms, mollification and Bony paraproducts.

mod mollifier;
mod norm;
mod paraproduct;
mod partition;

pub use mollifier::{mollify, Mollifier};
pub use norm::{
    besov_norm, besov_norm_vector, lp_block, lp_blocks, mollification_rate_scan,
    prep_identity_scan, BesovNorm, RateScan,
};
pub use paraproduct::{
    admissible_interval, bony_sum, drift_product, interpolation_bound_check, para_gt, para_lt, resonant,
    DriftProduct,
};
pub use partition::{smooth_step, BesovIndex, DyadicPartition};
