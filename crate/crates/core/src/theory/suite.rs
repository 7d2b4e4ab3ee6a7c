use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::*;
use super::CheckResult;
use crate::coverage::{CwSolverConfig, DataDistribution};
use crate::harness::random_tabular;
use crate::lsvi::{
    feature_coverage_gamma, make_random_linear_mdp, run_lsvi, variance_profile, FeatureStructure, LsviConfig,
};
use crate::mdp::enumerate_policies;
use crate::rng::{stream, stream_seed};
use crate::{LabError, Result};

const SUITES: [&str; 7] =
    ["cw_le_cov", "pcov_equivalence", "phi_bounds", "popoviciu", "elliptical_potential", "per_sa_potential", "rhomu"];

pub fn suite_names() -> &'static [&'static str] {
    &SUITES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub results: Vec<CheckResult>,
}

impl SuiteReport {
    /// Every check passed or was skipped.
    pub fn ok(&self) -> bool {
        self.results.iter().all(|r| r.pass || r.skipped)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite report is serializable")
    }
}

/// Run one named check (or `"all"`) on its default seeded corpus.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let selected: Vec<&str> = if name == "all" {
        SUITES.to_vec()
    } else if SUITES.contains(&name) {
        vec![name]
    } else {
        return Err(LabError::InvalidArgument(format!(
            "unknown suite `{name}`; expected `all` or one of {}",
            SUITES.join(", ")
        )));
    };
    let results = selected.par_iter().map(|s| run_one(s, seed)).collect::<Result<Vec<_>>>()?;
    Ok(SuiteReport { seed, results })
}

fn run_one(name: &str, seed: u64) -> Result<CheckResult> {
    let base = stream_seed(seed, SUITES.iter().position(|s| *s == name).unwrap_or(0) as u64);
    match name {
        "cw_le_cov" => {
            let corpus = (0..12)
                .map(|k| random_tabular(2 + (k % 2) as usize, 2, 2 + (k / 6) as usize, stream_seed(base, k)))
                .collect::<Result<Vec<_>>>()?;
            verify_cw_le_cov(&corpus, &[1.0, 2.0, 4.0], &CwSolverConfig::default())
        }
        "pcov_equivalence" => {
            let cases = (0..6)
                .map(|k| {
                    let mdp = random_tabular(2, 2, 2, stream_seed(base, k))?;
                    let reference = enumerate_policies(&mdp, 1 << 10)?.materialize(&mdp)?.swap_remove(0);
                    Ok(PcovCase { mdp, reference })
                })
                .collect::<Result<Vec<_>>>()?;
            verify_pcov_equivalence(&cases, &[0.0, 0.5, 1.0, 2.0])
        }
        "phi_bounds" => {
            let parts = (0..3)
                .into_par_iter()
                .map(|k| {
                    let m = make_random_linear_mdp(4, 6, 2, 3, FeatureStructure::Generic, stream_seed(base, k))?;
                    Ok(verify_phi_bounds_run(&run_lsvi(&m, &LsviConfig::new(300), stream_seed(base, 100 + k))?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CheckResult::merge("phi_bounds", 1e-9, parts))
        }
        "popoviciu" => {
            let m = make_random_linear_mdp(4, 6, 2, 3, FeatureStructure::Generic, base)?;
            let mu = DataDistribution::uniform(3, 6, 2);
            let grid: Vec<f64> = (0..8).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
            Ok(verify_popoviciu(&variance_profile(&m, &mu, &grid, 200, base)?))
        }
        "elliptical_potential" => {
            let parts = (0..5)
                .map(|k| {
                    let mut rng = stream(base, k);
                    let seq: Vec<Vec<f64>> = (0..2000)
                        .map(|_| {
                            let v: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() - 0.5).collect();
                            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                            v.iter().map(|x| x / n).collect()
                        })
                        .collect();
                    verify_elliptical_potential(&seq, 1.0, 4)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CheckResult::merge("elliptical_potential", 1e-9, parts))
        }
        "per_sa_potential" => {
            let parts = (0..20)
                .map(|k| {
                    let mut rng = stream(base, k);
                    let (mu, c, p) = random_potential_setup(6, &mut rng);
                    let seq = admissible_sequence(&mu, c, p, 2000, &mut rng)?;
                    verify_per_sa_potential(&seq, &mu, c, p)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CheckResult::merge("per_sa_potential", 0.0, parts))
        }
        "rhomu" => {
            let parts = (0..3)
                .into_par_iter()
                .map(|k| {
                    let m = make_random_linear_mdp(3, 6, 2, 3, FeatureStructure::Generic, stream_seed(base, k))?;
                    let mu = DataDistribution::uniform(3, 6, 2);
                    let gamma = feature_coverage_gamma(&m, &mu)?;
                    let mut cfg = LsviConfig::new(300);
                    cfg.coverage_mu = Some(mu);
                    Ok(verify_rhomu(&run_lsvi(&m, &cfg, stream_seed(base, 100 + k))?, gamma))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CheckResult::merge("rhomu", 1e-12, parts))
        }
        _ => unreachable!("suite names are checked by the caller"),
    }
}

/// A random reference distribution over `n` points, `p in {1, 2, 4}` and a
/// constant `C` large enough that admissible distributions exist.
pub fn random_potential_setup<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, f64, f64) {
    let mu = crate::lsvi::simplex_point(n, rng);
    let p = [1.0, 2.0, 4.0][rng.gen_range(0..3)];
    // sum (C mu)^p >= 1  <=>  C >= 1 / ||mu||_p
    let norm = mu.iter().map(|m| m.powf(p)).sum::<f64>().powf(1.0 / p);
    let c = rng.gen_range(1.0..3.0) / norm;
    (mu, c, p)
}
