//! Builtin environment generators, regret-scaling fits and batch execution
//! of seeded experiments.

mod experiment;
mod generators;
mod io;
mod scaling;

pub use experiment::{
    build_class, generate, load_environment, median, resolve_jobs, run_cell, run_experiment, CellSummary, ClassSpec,
    EnvSpec, ExperimentConfig, ExperimentSummary, Hyper, SeedSummary, JOBS_ENV,
};
pub use generators::{bandit, bandit_class, block_mdp, chain, closed_class_instance, random_tabular, ClosedClassSpec};
pub use io::write_atomic;
pub use scaling::{fit_scaling, ScalingFit};
