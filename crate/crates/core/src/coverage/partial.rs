use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coefficients::cumulative_reachability;
use super::{ClassOccupancies, CoverageReport, Sentinel};
use crate::mdp::{Policy, PolicyClass, TabularMdp};
use crate::{LabError, Result};

/// Slack on the radius test so that `zeta = 0` admits policies whose
/// occupancies agree up to rounding.
const TV_SLACK: f64 = 1e-12;

/// Unnormalised total variation `sum |p - q|`, in `[0, 2]` for distributions.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "tv_distance: length mismatch");
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

/// Policies whose step occupancies all lie within `zeta` of the reference's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialClass {
    pub zeta: f64,
    pub reference: Policy,
    pub reference_index: usize,
    /// Indices into the explicit class.
    pub members: Vec<usize>,
    pub complement: Vec<usize>,
}

pub fn partial_class(mdp: &TabularMdp, class: &PolicyClass, reference: &Policy, zeta: f64) -> Result<PartialClass> {
    let occs = ClassOccupancies::compute(mdp, class)?;
    let idx = occs
        .position(reference)
        .ok_or_else(|| LabError::InvalidArgument("reference policy is not a member of the class".into()))?;
    partial_class_with(&occs, idx, zeta)
}

pub(crate) fn partial_class_with(occs: &ClassOccupancies, reference_index: usize, zeta: f64) -> Result<PartialClass> {
    if !(0.0..=2.0).contains(&zeta) {
        return Err(LabError::OutOfRange(format!("zeta = {zeta} outside [0, 2]")));
    }
    let reference = &occs.occupancies[reference_index];
    let (mut members, mut complement) = (Vec::new(), Vec::new());
    for (i, occ) in occs.occupancies.iter().enumerate() {
        let inside = (0..occs.horizon()).all(|h| tv_distance(occ.step(h), reference.step(h)) <= zeta + TV_SLACK);
        if inside {
            members.push(i);
        } else {
            complement.push(i);
        }
    }
    Ok(PartialClass { zeta, reference: occs.policies[reference_index].clone(), reference_index, members, complement })
}

/// Partial coverability, evaluated as `max_h sum sup_{pi in M} rho_h^pi` with
/// certificate `mu_h ∝ sup_{pi in M} rho_h^pi`.
pub fn p_cov(mdp: &TabularMdp, class: &PolicyClass, partial: &PartialClass) -> Result<CoverageReport> {
    let occs = ClassOccupancies::compute(mdp, class)?;
    p_cov_with(&occs, partial)
}

pub(crate) fn p_cov_with(occs: &ClassOccupancies, partial: &PartialClass) -> Result<CoverageReport> {
    if partial.members.is_empty() {
        return Err(LabError::InvalidArgument("partial class has no members".into()));
    }
    let sups = (0..occs.horizon()).map(|h| occs.sup_step(h, partial.members.iter().copied())).collect();
    Ok(cumulative_reachability("p_cov", sups).with_param("zeta", partial.zeta))
}

/// Out-of-class coverage on the hard sets
/// `B_h = {(s,a): rho_h^pi(s,a) > c1 * P_cov * mu_h(s,a) for every pi outside}`,
/// `P_out = max_{h, pi outside} (||rho_h^pi / mu_h||_{l2 on B_h})^(1/2)`.
pub fn p_out(mdp: &TabularMdp, class: &PolicyClass, partial: &PartialClass, c1: f64) -> Result<CoverageReport> {
    let occs = ClassOccupancies::compute(mdp, class)?;
    let pcov = p_cov_with(&occs, partial)?;
    p_out_with(&occs, partial, &pcov, c1)
}

pub(crate) fn p_out_with(
    occs: &ClassOccupancies,
    partial: &PartialClass,
    pcov: &CoverageReport,
    c1: f64,
) -> Result<CoverageReport> {
    if !(c1 >= 1.0) {
        return Err(LabError::InvalidArgument(format!("c1 = {c1} must be >= 1")));
    }
    let mu = pcov.mu_star.as_ref().expect("p_cov report carries its certificate");
    let na = occs.n_actions();
    let mut b_sets = Vec::with_capacity(occs.horizon());
    let mut value = 0.0_f64;
    let mut witness = None;
    let mut infinite_at = None;
    for (h, mu_h) in mu.iter().enumerate() {
        let b: Vec<usize> = if partial.complement.is_empty() {
            Vec::new()
        } else {
            (0..occs.n_pairs())
                .filter(|&z| {
                    partial.complement.iter().all(|&i| occs.occupancies[i].step(h)[z] > c1 * pcov.value * mu_h[z])
                })
                .collect()
        };
        for &i in &partial.complement {
            let rho = occs.occupancies[i].step(h);
            let mut sq = 0.0;
            for &z in &b {
                if mu_h[z] <= 0.0 {
                    // rho > 0 here by membership in B
                    sq = f64::INFINITY;
                    if infinite_at.is_none() {
                        infinite_at = Some(Sentinel::ZeroMass { h, s: z / na, a: z % na, policy: Some(i) });
                    }
                    break;
                }
                sq += (rho[z] / mu_h[z]).powi(2);
            }
            let v = sq.sqrt().sqrt();
            if v > value {
                value = v;
                witness = Some((h, i));
            }
        }
        b_sets.push(b);
    }
    let mut report = CoverageReport::new("p_out", value)
        .with_param("zeta", partial.zeta)
        .with_param("c1", c1)
        .with_param("p_cov", pcov.value);
    report.b_sets = Some(b_sets);
    report.mu_star = Some(mu.clone());
    report.infinite_at = infinite_at;
    if let Some((h, i)) = witness {
        report.witness_step = Some(h);
        report.witness_policy = Some(i);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub zeta: f64,
    pub members: usize,
    pub p_cov: f64,
    #[serde(with = "super::report::extended_f64")]
    pub p_out: f64,
    /// `sqrt(c1 * P_cov) + P_out / sqrt(P_cov)`.
    #[serde(with = "super::report::extended_f64")]
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaTradeoff {
    pub c1: f64,
    pub rows: Vec<ZetaRow>,
    /// Row with the smallest bound (first on ties).
    pub argmin: usize,
    /// Row where `P_out - sqrt(c1) * P_cov` is closest to zero.
    pub crossing: usize,
    pub p_cov_monotone: bool,
}

/// Sweep of the partial-coverage trade-off over an ascending `zeta` grid.
pub fn zeta_tradeoff(
    mdp: &TabularMdp,
    class: &PolicyClass,
    reference: &Policy,
    zeta_grid: &[f64],
    c1: f64,
) -> Result<ZetaTradeoff> {
    let occs = ClassOccupancies::compute(mdp, class)?;
    let idx = occs
        .position(reference)
        .ok_or_else(|| LabError::InvalidArgument("reference policy is not a member of the class".into()))?;
    zeta_tradeoff_with(&occs, idx, zeta_grid, c1)
}

pub(crate) fn zeta_tradeoff_with(
    occs: &ClassOccupancies,
    reference_index: usize,
    zeta_grid: &[f64],
    c1: f64,
) -> Result<ZetaTradeoff> {
    if zeta_grid.is_empty() {
        return Err(LabError::InvalidArgument("empty zeta grid".into()));
    }
    if zeta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(LabError::InvalidArgument("zeta grid must be ascending".into()));
    }
    let rows = zeta_grid
        .par_iter()
        .map(|&zeta| {
            let partial = partial_class_with(occs, reference_index, zeta)?;
            let pcov = p_cov_with(occs, &partial)?;
            let pout = p_out_with(occs, &partial, &pcov, c1)?;
            Ok(ZetaRow {
                zeta,
                members: partial.members.len(),
                p_cov: pcov.value,
                p_out: pout.value,
                bound: (c1 * pcov.value).sqrt() + pout.value / pcov.value.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = first_min_by(&rows, |r| r.bound);
    let crossing = first_min_by(&rows, |r| (r.p_out - c1.sqrt() * r.p_cov).abs());
    let p_cov_monotone = rows.windows(2).all(|w| w[1].p_cov >= w[0].p_cov - 1e-12);
    debug_assert!(p_cov_monotone, "P_cov decreased along an ascending zeta grid");
    Ok(ZetaTradeoff { c1, rows, argmin, crossing, p_cov_monotone })
}

fn first_min_by(rows: &[ZetaRow], key: impl Fn(&ZetaRow) -> f64) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        let k = key(r);
        let b = key(&rows[best]);
        if k < b || (b.is_nan() && !k.is_nan()) {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::c_cov;
    use crate::mdp::enumerate_policies;

    fn three_state() -> TabularMdp {
        // s0 --a0--> s1, s0 --a1--> s2; the second step is absorbing
        let p0 = vec![
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]],
            vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]],
        ];
        let r = vec![vec![0.0; 2]; 3];
        TabularMdp::new(0, vec![p0.clone(), p0], vec![r.clone(), r]).unwrap()
    }

    #[test]
    fn tv_is_unnormalised() {
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 2.0);
    }

    #[test]
    fn zeta_endpoints() {
        let mdp = three_state();
        let class = enumerate_policies(&mdp, 1 << 12).unwrap();
        let reference = class.policies().unwrap()[0].clone();
        let full = partial_class(&mdp, &class, &reference, 2.0).unwrap();
        assert!(full.complement.is_empty());
        let cov = c_cov(&mdp, &class).unwrap().value;
        assert!((p_cov(&mdp, &class, &full).unwrap().value - cov).abs() < 1e-12);
        assert_eq!(p_out(&mdp, &class, &full, 2.0).unwrap().value, 0.0);
        let zero = partial_class(&mdp, &class, &reference, 0.0).unwrap();
        assert!(zero.members.contains(&0));
        assert_eq!(p_cov(&mdp, &class, &zero).unwrap().value, 1.0);
    }

    #[test]
    fn out_of_range_zeta_is_rejected() {
        let mdp = three_state();
        let class = enumerate_policies(&mdp, 1 << 12).unwrap();
        let reference = class.policies().unwrap()[0].clone();
        assert!(partial_class(&mdp, &class, &reference, 2.5).is_err());
        assert!(partial_class(&mdp, &class, &reference, -0.1).is_err());
    }

    #[test]
    fn sweep_is_monotone() {
        let mdp = three_state();
        let class = enumerate_policies(&mdp, 1 << 12).unwrap();
        let reference = class.policies().unwrap()[0].clone();
        let grid: Vec<f64> = (0..9).map(|k| k as f64 * 0.25).collect();
        let sweep = zeta_tradeoff(&mdp, &class, &reference, &grid, 2.0).unwrap();
        assert!(sweep.p_cov_monotone);
        assert_eq!(sweep.rows[0].p_cov, 1.0);
        let last = sweep.rows.last().unwrap();
        assert_eq!(last.p_out, 0.0);
        assert!(sweep.rows[sweep.argmin].bound <= last.bound + 1e-12);
    }
}
