//! Euler–Maruyama ensembles and the pathwise statistics built on them.

mod diagnostics;
mod engine;
mod format;
mod pathstats;

pub use diagnostics::{
    additive_functional, incompressibility_check, ito_trick, martingale_diagnostics,
    stopped_composition_test, BoxScan, FunctionalStats, IncompressibilityReport, ItoTrickReport,
    MartingaleReport, StoppedReport, TimeSlices,
};
pub use engine::{
    checkpoint_steps, euler_maruyama, increment_rng, initial_rng, map_paths, simulate_checkpoints,
    simulate_observed, CheckpointObserver, Checkpoints, DriftSampler, InitialDensity, Observer,
    PathEnsemble, SimConfig,
};
pub use format::{read_paths, read_paths_from, write_paths, write_paths_to, PATH_MAGIC};
pub use pathstats::{
    chaining_constant, first_entry, hitting_probability, holder_norm, holder_tail,
    moment_regression, occupation_lower_bound, occupation_time, stopping_time, HolderTail,
    MomentRegression, StopRecord,
};
