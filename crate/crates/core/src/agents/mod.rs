//! Agents over finite classes of tabular Q-functions: GOLF (optimism over a
//! least-squares confidence set) and Hybrid-Q (fitted Q-iteration on pooled
//! offline and online data).

mod function_class;
mod golf;
mod hybridq;
mod loss;
mod offline;

pub use function_class::{check_completeness, check_realizability, ClassCheck, FunctionClass, QFunction};
pub use golf::{golf_beta, run_golf, ConfidenceSet, GolfConfig, GolfRun, RegretMode};
pub use hybridq::{hybrid_coverage_ratios, offline_bellman_error, run_hybridq, HybridConfig};
pub use loss::{squared_bellman_loss, LossCache};
pub use offline::{make_offline_dataset, Behavior, OfflineDataset};
