//! Concentrability and coverability coefficients, computed exactly on known
//! models.
//!
//! Total-variation distances in this module are the unnormalised L1 distance
//! `sum |p - q|`, taking values in `[0, 2]`; partial-class radii `zeta` use the
//! same convention.

mod coefficients;
mod cw;
mod distribution;
mod partial;
mod report;

pub use coefficients::{c_cov, c_infty, c_pi, ClassOccupancies};
pub(crate) use cw::c_cw_with;
pub use cw::{c_cw, c_cw_step, CwSolverConfig, CwStepSolution};
pub use distribution::DataDistribution;
pub use partial::{p_cov, p_out, partial_class, tv_distance, zeta_tradeoff, PartialClass, ZetaRow, ZetaTradeoff};
pub(crate) use partial::{p_cov_with, partial_class_with};
pub(crate) use report::extended_f64;
pub use report::{CoverageReport, Sentinel};
