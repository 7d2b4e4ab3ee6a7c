//! LSVI-UCB for linear MDPs, with the feature-coverage and low-variance
//! diagnostics and a random linear-MDP generator.

mod agent;
mod diagnostics;
mod generator;

pub use agent::{
    lsvi_beta, run_lsvi, CoverageRecord, EpisodeInfo, LambdaMode, LsviAgent, LsviConfig, LsviRun, SandwichSummary,
    INVERSE_FIDELITY_TOL,
};
pub use diagnostics::{
    feature_coverage_gamma, feature_second_moment, fit_alpha, min_eigenvalue, variance_profile, AssumptionDiagnostics,
};
pub(crate) use generator::simplex_point;
pub use generator::{make_random_linear_mdp, FeatureStructure};
