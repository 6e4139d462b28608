//! Spectral solver for the backward equation `∂_t v = Δv + ∇·(A∇v)` and the
//! deterministic checks built on it.

mod budget;
mod checks;
mod solver;

pub use checks::{
    duhamel_defect, energy_budget, expectation_oracle, identity_check, DuhamelDefect,
    EnergyBudget, IdentityResiduals,
};
pub use solver::{solve_kbe, solve_with, BudgetRow, KbeOperator, KbeOptions, KbeRun, Scheme};
