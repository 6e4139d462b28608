//! Experiment harness: weak rates, singular sets, energy-solution
//! diagnostics, configuration runs and their CSV/JSON/SVG outputs.

mod config;
mod rate;
mod report;
mod singularity;
mod spec;
mod suite;


pub use config::{
    entry_seed, execute, parse_config, plan_single, run_config, set_execution, EntryStatus, ExperimentKind, GateConfig, Manifest, ManifestEntry,
    Plan, Planned, PlannedEntry, RunOptions,
};
pub use rate::{
    eta_sensitivity, weak_rate, EtaRow, EtaSensitivity, FitMethod, LevelError, OracleMode, RateExperiment, RateReport,
    RateVerdict,
};
pub use report::{loglog_svg, rate_rows, singularity_rows, write_csv, write_json, CsvRow};
pub use singularity::{
    gate_cross_check, hoelder_dimension_gate, l_min, singularity_rate, EpsRow, GateReport, GateVerdict,
    HittingExperiment, SingularityReport,
};
pub use spec::{kbe_step, level_potential, sampler, EtaSpec, McSpec};
pub use suite::{energy_solution_suite, ito_across_levels, ItoLevels, SuiteConfig, SuiteReport};
