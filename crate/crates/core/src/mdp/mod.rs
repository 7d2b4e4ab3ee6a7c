//! Finite-horizon episodic MDPs and their exact dynamic-programming
//! primitives.

mod dp;
mod io;
mod linear;
mod policy;
mod sample;
mod tabular;

pub(crate) use dp::dot;
pub use dp::{
    bellman_apply, occupancy_measures, optimal_values, policy_value, reach_sup, reachability_table, OccupancyMeasure,
    OptimalValues,
};
pub use io::{load_mdp, save_mdp, Environment};
pub use linear::LinearMdp;
pub(crate) use policy::argmax_lowest;
pub use policy::{enumerate_policies, policy_count, Policy, PolicyClass};
pub(crate) use sample::sample_step;
pub use sample::{sample_episode, Transition};
pub use tabular::{RewardNoise, TabularMdp};

/// Tolerance for probability vectors produced by exact DP.
pub const PROB_TOL: f64 = 1e-12;

/// Tolerance for kernels induced by inner products in a linear MDP.
pub const LINEAR_PROB_TOL: f64 = 1e-9;
