//! Numerical checks of the inequalities the coverage and regret analyses rely
//! on. Every check returns the smallest observed slack and the case that
//! attained it.

mod checks;
mod suite;

pub use checks::{
    admissible_sequence, inf_form_p_cov, verify_cw_le_cov, verify_elliptical_potential, verify_pcov_equivalence,
    verify_per_sa_potential, verify_phi_bounds, verify_phi_bounds_run, verify_popoviciu, verify_regret_dominance,
    verify_rhomu, PcovCase, GRID_TOL,
};
pub use suite::{random_potential_setup, run_suite, suite_names, SuiteReport};

use serde::{Deserialize, Serialize};

/// Outcome of one check. `pass` iff `margin >= -tolerance`, unless skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub skipped: bool,
    /// Smallest slack observed (`+inf` when nothing was measured).
    #[serde(with = "crate::coverage::extended_f64")]
    pub margin: f64,
    pub tolerance: f64,
    /// Case attaining the margin.
    pub witness: String,
    pub trials: usize,
    /// Extra measured quantities, e.g. the potential constant.
    #[serde(default)]
    pub details: std::collections::BTreeMap<String, f64>,
}

impl CheckResult {
    pub(crate) fn new(name: &str, tolerance: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            pass: true,
            skipped: false,
            margin: f64::INFINITY,
            tolerance,
            witness: String::new(),
            trials: 0,
            details: Default::default(),
        }
    }

    pub(crate) fn skipped(name: &str, reason: &str) -> Self {
        let mut r = CheckResult::new(name, 0.0);
        r.skipped = true;
        r.witness = reason.to_string();
        r
    }

    /// Record one trial's slack; keeps the worst.
    pub(crate) fn observe(&mut self, margin: f64, witness: impl FnOnce() -> String) {
        self.trials += 1;
        if margin < self.margin || (margin.is_nan() && !self.margin.is_nan()) {
            self.margin = margin;
            self.witness = witness();
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.pass = self.skipped || self.margin >= -self.tolerance;
        self
    }

    /// Fold several results of the same check into one.
    pub fn merge(name: &str, tolerance: f64, parts: impl IntoIterator<Item = CheckResult>) -> Self {
        let mut out = CheckResult::new(name, tolerance);
        let mut any = false;
        for p in parts {
            any = true;
            let trials = p.trials;
            out.observe(p.margin, || p.witness.clone());
            out.trials += trials.saturating_sub(1);
            for (k, v) in p.details {
                let e = out.details.entry(k).or_insert(f64::NEG_INFINITY);
                *e = e.max(v);
            }
        }
        if !any {
            out.skipped = true;
        }
        out.finish()
    }

    pub fn status(&self) -> &'static str {
        match (self.skipped, self.pass) {
            (true, _) => "SKIP",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        }
    }
}
