//! Coverage conditions for online reinforcement learning on small, exactly
//! solvable episodic MDPs.
//!
//! The crate is organised around the objects a coverage argument talks about:
//!
//! - [`mdp`]: tabular and linear finite-horizon MDPs, occupancy measures,
//!   reachability and optimal values by dynamic programming.
//! - [`coverage`]: exact and minimax computation of concentrability and
//!   coverability coefficients (`C_inf`, `C_pi`, `C_cov`, `C_cw`, `P_cov`,
//!   `P_out`) with certificates.
//! - [`agents`]: GOLF and Hybrid-Q over finite tabular function classes.
//! - [`lsvi`]: LSVI-UCB for linear MDPs plus the feature-coverage and
//!   low-variance diagnostics.
//! - [`theory`]: one numerical check per inequality, each returning a
//!   [`theory::CheckResult`] with its margin and witness.
//! - [`trace`]: per-checkpoint regret traces and their CSV form.
//! - [`harness`]: generators, regret-scaling fits and batch execution.
//!
//! Steps are indexed from `0` to `H - 1` throughout; the value at step `H`
//! is identically zero.

pub mod agents;
pub mod coverage;
pub mod error;
pub mod harness;
pub mod lsvi;
pub mod mdp;
pub mod rng;
pub mod theory;
pub mod trace;

pub use error::{LabError, Result};
