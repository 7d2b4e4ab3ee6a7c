use super::{CoverageReport, DataDistribution, Sentinel};
use crate::agents::FunctionClass;
use crate::mdp::{
    bellman_apply, occupancy_measures, reachability_table, OccupancyMeasure, Policy, PolicyClass, TabularMdp,
};
use crate::{LabError, Result};

/// Bellman residuals at or below this magnitude are treated as exact zeros.
const RESIDUAL_ZERO: f64 = 1e-12;

/// An explicit policy class together with the exact occupancy measure of
/// every member.
#[derive(Debug, Clone)]
pub struct ClassOccupancies {
    pub policies: Vec<Policy>,
    pub occupancies: Vec<OccupancyMeasure>,
    horizon: usize,
    n_states: usize,
    n_actions: usize,
}

impl ClassOccupancies {
    pub fn compute(mdp: &TabularMdp, class: &PolicyClass) -> Result<Self> {
        let policies = class.materialize(mdp)?;
        Self::from_policies(mdp, policies)
    }

    pub fn from_policies(mdp: &TabularMdp, policies: Vec<Policy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(LabError::InvalidArgument("policy class is empty".into()));
        }
        let occupancies = policies.iter().map(|p| occupancy_measures(mdp, p)).collect::<Result<Vec<_>>>()?;
        Ok(ClassOccupancies {
            policies,
            occupancies,
            horizon: mdp.horizon(),
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
        })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Pointwise `sup_{pi in subset} rho_h^pi` at step `h`.
    pub fn sup_step(&self, h: usize, subset: impl IntoIterator<Item = usize>) -> Vec<f64> {
        let mut sup = vec![0.0; self.n_pairs()];
        for i in subset {
            for (m, r) in sup.iter_mut().zip(self.occupancies[i].step(h)) {
                *m = f64::max(*m, *r);
            }
        }
        sup
    }

    pub fn position(&self, policy: &Policy) -> Option<usize> {
        self.policies.iter().position(|p| p == policy)
    }
}

/// Cumulative reachability `max_h sum_{(s,a)} sup_pi rho_h^pi(s,a)` with the
/// minimising certificate `mu_h ∝ sup_pi rho_h^pi`.
///
/// Explicit classes take the pointwise maximum over member occupancies; the
/// symbolic full class uses the max-reachability recursion instead of
/// enumeration.
pub fn c_cov(mdp: &TabularMdp, class: &PolicyClass) -> Result<CoverageReport> {
    let sups: Vec<Vec<f64>> = match class {
        PolicyClass::Explicit(_) => {
            let occs = ClassOccupancies::compute(mdp, class)?;
            (0..mdp.horizon()).map(|h| occs.sup_step(h, 0..occs.len())).collect()
        }
        PolicyClass::AllDeterministic { .. } => {
            let reach = reachability_table(mdp);
            let (ns, na) = (mdp.n_states(), mdp.n_actions());
            (0..mdp.horizon()).map(|h| (0..ns * na).map(|pair| reach[h * ns + pair / na]).collect()).collect()
        }
    };
    Ok(cumulative_reachability("c_cov", sups))
}

/// `max_h sum sup` and its certificate from per-step pointwise suprema.
pub(crate) fn cumulative_reachability(name: &str, sups: Vec<Vec<f64>>) -> CoverageReport {
    let totals: Vec<f64> = sups.iter().map(|s| s.iter().sum()).collect();
    let (witness_step, value) =
        totals
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (h, v)| if v > best.1 { (h, v) } else { best });
    let mu_star = sups.iter().zip(&totals).map(|(s, t)| s.iter().map(|x| x / t).collect()).collect();
    let mut report = CoverageReport::new(name, value);
    report.mu_star = Some(mu_star);
    report.witness_step = Some(witness_step);
    report
}

/// All-policy concentrability `max_{pi, h} ||rho_h^pi / mu_h||_inf`.
///
/// Returns `+inf` with the offending `(h, s, a)` when some member puts mass
/// where `mu` has none.
pub fn c_infty(mdp: &TabularMdp, class: &PolicyClass, mu: &DataDistribution) -> Result<CoverageReport> {
    let occs = ClassOccupancies::compute(mdp, class)?;
    c_infty_with(&occs, mu)
}

pub(crate) fn c_infty_with(occs: &ClassOccupancies, mu: &DataDistribution) -> Result<CoverageReport> {
    mu.check_dims(occs.horizon(), occs.n_states(), occs.n_actions())?;
    let na = occs.n_actions();
    let mut best = (0.0_f64, 0usize, 0usize);
    for (i, occ) in occs.occupancies.iter().enumerate() {
        for h in 0..occs.horizon() {
            for (pair, (r, m)) in occ.step(h).iter().zip(mu.step(h)).enumerate() {
                if *r <= 0.0 {
                    continue;
                }
                if *m <= 0.0 {
                    let mut report = CoverageReport::new("c_infty", f64::INFINITY);
                    report.witness_policy = Some(i);
                    report.witness_step = Some(h);
                    report.infinite_at = Some(Sentinel::ZeroMass { h, s: pair / na, a: pair % na, policy: Some(i) });
                    return Ok(report);
                }
                let ratio = r / m;
                if ratio > best.0 {
                    best = (ratio, i, h);
                }
            }
        }
    }
    let mut report = CoverageReport::new("c_infty", best.0);
    report.witness_policy = Some(best.1);
    report.witness_step = Some(best.2);
    Ok(report)
}

/// Bellman-error concentrability of one policy:
/// `max_h max_f |E_{rho_h^pi}[delta_h]| / sqrt(E_{mu_h}[delta_h^2])` with
/// `delta_h = f_h - T_h f_{h+1}`.
///
/// Only the pair `(f_h, f_{h+1})` enters step `h`, so the maximum runs over the
/// pairs present in the class. `0/0` counts as zero; a nonzero numerator over
/// a zero denominator yields `+inf` naming the pair.
pub fn c_pi(mdp: &TabularMdp, class: &FunctionClass, mu: &DataDistribution, policy: &Policy) -> Result<CoverageReport> {
    class.check_dims(mdp)?;
    mu.check_dims(mdp.horizon(), mdp.n_states(), mdp.n_actions())?;
    let occ = occupancy_measures(mdp, policy)?;
    let mut best = 0.0_f64;
    let mut witness = None;
    for h in 0..mdp.horizon() {
        for (i, j) in class.step_pairs(h) {
            let target = match j {
                Some(j) => bellman_apply(mdp, class.get(h + 1, j), h),
                None => mdp.rewards_at(h).to_vec(),
            };
            let delta: Vec<f64> = class
                .get(h, i)
                .iter()
                .zip(&target)
                .map(|(f, t)| {
                    let d = f - t;
                    if d.abs() <= RESIDUAL_ZERO {
                        0.0
                    } else {
                        d
                    }
                })
                .collect();
            let num: f64 = occ.step(h).iter().zip(&delta).map(|(r, d)| r * d).sum::<f64>().abs();
            let den: f64 = mu.step(h).iter().zip(&delta).map(|(m, d)| m * d * d).sum::<f64>().sqrt();
            if den == 0.0 {
                if num > 0.0 {
                    let mut report = CoverageReport::new("c_pi", f64::INFINITY);
                    report.witness_step = Some(h);
                    report.infinite_at = Some(Sentinel::ZeroDenominator { h, f_h: i, f_next: j });
                    return Ok(report);
                }
                continue;
            }
            let ratio = num / den;
            if ratio > best {
                best = ratio;
                witness = Some(h);
            }
        }
    }
    let mut report = CoverageReport::new("c_pi", best);
    report.witness_step = witness;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{enumerate_policies, optimal_values};

    fn chain() -> TabularMdp {
        let step = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0], vec![0.0, 1.0]]];
        let r = vec![vec![0.0, 0.1], vec![0.2, 0.3]];
        TabularMdp::new(0, vec![step.clone(), step], vec![r.clone(), r]).unwrap()
    }

    #[test]
    fn singleton_class_coefficients_are_one() {
        let mdp = chain();
        let pi = Policy::constant(2, 2, 2, 1).unwrap();
        let class = PolicyClass::explicit(vec![pi.clone()]).unwrap();
        assert!((c_cov(&mdp, &class).unwrap().value - 1.0).abs() < 1e-15);
        let mu = DataDistribution::from_occupancy(&occupancy_measures(&mdp, &pi).unwrap());
        assert_eq!(c_infty(&mdp, &class, &mu).unwrap().value, 1.0);
    }

    #[test]
    fn uniform_mu_on_point_mass_gives_pair_count() {
        let mdp = chain();
        let class = PolicyClass::explicit(vec![Policy::constant(2, 2, 2, 1).unwrap()]).unwrap();
        let mu = DataDistribution::uniform(2, 2, 2);
        assert_eq!(c_infty(&mdp, &class, &mu).unwrap().value, 4.0);
    }

    #[test]
    fn zero_mass_is_an_infinite_sentinel() {
        let mdp = chain();
        let pi = Policy::constant(2, 2, 2, 1).unwrap();
        let class = PolicyClass::explicit(vec![pi]).unwrap();
        let mu = DataDistribution::from_occupancy(
            &occupancy_measures(&mdp, &Policy::constant(2, 2, 2, 0).unwrap()).unwrap(),
        );
        let report = c_infty(&mdp, &class, &mu).unwrap();
        assert!(report.value.is_infinite());
        assert_eq!(report.infinite_at, Some(Sentinel::ZeroMass { h: 0, s: 0, a: 1, policy: Some(0) }));
    }

    #[test]
    fn full_class_routes_agree_on_chain() {
        let mdp = chain();
        let dp = c_cov(&mdp, &PolicyClass::AllDeterministic { cap: 1 }).unwrap();
        let en = c_cov(&mdp, &enumerate_policies(&mdp, 100).unwrap()).unwrap();
        assert!((dp.value - en.value).abs() < 1e-12);
        assert!(dp.value <= 4.0);
    }

    #[test]
    fn c_pi_of_qstar_is_zero() {
        let mdp = chain();
        let opt = optimal_values(&mdp);
        let class = FunctionClass::singleton(&mdp, &opt.q).unwrap();
        let mu = DataDistribution::uniform(2, 2, 2);
        let report = c_pi(&mdp, &class, &mu, &Policy::constant(2, 2, 2, 0).unwrap()).unwrap();
        assert_eq!(report.value, 0.0);
    }
}
