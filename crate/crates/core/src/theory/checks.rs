use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::CheckResult;
use crate::coverage::{c_cov, c_cw_with, p_cov_with, partial_class_with, ClassOccupancies, CwSolverConfig};
use crate::lsvi::{AssumptionDiagnostics, LsviRun};
use crate::mdp::{enumerate_policies, Policy, PolicyClass, TabularMdp};
use crate::trace::RegretTrace;
use crate::{LabError, Result};

/// Agreement required between the grid-searched and closed-form partial
/// coverability.
pub const GRID_TOL: f64 = 0.02;
const ENUM_CAP: u64 = 1 << 16;
const NORM_SLACK: f64 = 1e-12;
/// Largest potential constant accepted by the per-pair potential check.
const KAPPA_MAX: f64 = 4.0;

fn full_class(mdp: &TabularMdp) -> Result<(PolicyClass, ClassOccupancies)> {
    let class = enumerate_policies(mdp, ENUM_CAP)?;
    let occs = ClassOccupancies::compute(mdp, &class)?;
    Ok((class, occs))
}

/// `C_cw^(1/p) <= C_cov` over the full deterministic class of every MDP, and
/// `C_cw = 1` exactly at `p = 1`.
pub fn verify_cw_le_cov(corpus: &[TabularMdp], p_list: &[f64], cfg: &CwSolverConfig) -> Result<CheckResult> {
    let parts = corpus
        .par_iter()
        .enumerate()
        .map(|(k, mdp)| {
            let (class, occs) = full_class(mdp)?;
            let cov = c_cov(mdp, &class)?.value;
            let mut r = CheckResult::new("cw_le_cov", 1e-9);
            for &p in p_list {
                let cw = c_cw_with(&occs, p, cfg)?.value;
                r.observe(cov - cw.powf(1.0 / p), || format!("mdp {k}, p = {p}: c_cw = {cw}, c_cov = {cov}"));
                if p == 1.0 {
                    r.observe(-(cw - 1.0).abs(), || format!("mdp {k}, p = 1: c_cw = {cw} (expected exactly 1)"));
                }
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckResult::merge("cw_le_cov", 1e-9, parts))
}

/// A tiny MDP plus the reference policy of its partial classes.
#[derive(Debug, Clone)]
pub struct PcovCase {
    pub mdp: TabularMdp,
    pub reference: Policy,
}

/// Every composition of `total` into `n` nonnegative parts.
fn compositions(n: usize, total: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(prefix: &mut Vec<usize>, n: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            f(prefix);
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(prefix, n, left - k, f);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(n), n, total, f);
}

/// `max_k max_z rows[k][z] / mu[z]`.
fn worst_ratio(rows: &[Vec<f64>], mu: &[f64]) -> f64 {
    let mut worst = 0.0_f64;
    for row in rows {
        for (r, m) in row.iter().zip(mu) {
            if *r > 0.0 {
                if *m <= 0.0 {
                    return f64::INFINITY;
                }
                worst = worst.max(r / m);
            }
        }
    }
    worst
}

/// `inf_mu max_k ||rows_k / mu||_inf` over the simplex of dimension
/// `rows[0].len() <= 4`: a 0.01 grid followed by two zoomed passes at 1e-3 and
/// 1e-4 around the incumbent.
fn grid_inf(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows[0].len();
    if n > 4 {
        return Err(LabError::InvalidArgument(format!("grid search supports at most 4 pairs per step, got {n}")));
    }
    let coarse = 100usize;
    let mut best = (f64::INFINITY, vec![0.0; n]);
    let mut mu = vec![0.0; n];
    compositions(n, coarse, &mut |c| {
        for (m, k) in mu.iter_mut().zip(c) {
            *m = *k as f64 / coarse as f64;
        }
        let v = worst_ratio(rows, &mu);
        if v < best.0 {
            best = (v, mu.clone());
        }
    });
    let mut prev = 1.0 / coarse as f64;
    for res in [1e-3, 1e-4] {
        let reach = (3.0 * prev / res).round() as i64;
        let center = best.1.clone();
        let mut offsets = vec![-reach; n - 1];
        loop {
            let mut point = vec![0.0; n];
            let mut head = 0.0;
            for i in 0..n - 1 {
                point[i] = center[i] + offsets[i] as f64 * res;
                head += point[i];
            }
            point[n - 1] = 1.0 - head;
            if point.iter().all(|&x| x >= -1e-15) {
                point.iter_mut().for_each(|x| *x = x.max(0.0));
                let v = worst_ratio(rows, &point);
                if v < best.0 {
                    best = (v, point);
                }
            }
            // odometer over the first n - 1 offsets
            let mut i = 0;
            while i < n - 1 {
                offsets[i] += 1;
                if offsets[i] <= reach {
                    break;
                }
                offsets[i] = -reach;
                i += 1;
            }
            if i == n - 1 {
                break;
            }
        }
        prev = res;
    }
    Ok(best.0)
}

/// Partial coverability in its infimum form,
/// `max_h inf_{mu_h} max_{pi in M} ||rho_h^pi / mu_h||_inf`, by grid search.
pub fn inf_form_p_cov(occs: &ClassOccupancies, members: &[usize]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for h in 0..occs.horizon() {
        let mut rows: Vec<Vec<f64>> = members.iter().map(|&i| occs.occupancies[i].step(h).to_vec()).collect();
        rows.dedup();
        worst = worst.max(grid_inf(&rows)?);
    }
    Ok(worst)
}

/// Closed-form partial coverability against the grid-searched infimum form.
pub fn verify_pcov_equivalence(cases: &[PcovCase], zeta_list: &[f64]) -> Result<CheckResult> {
    let parts = cases
        .par_iter()
        .enumerate()
        .map(|(k, case)| {
            let (_, occs) = full_class(&case.mdp)?;
            let idx = occs
                .position(&case.reference)
                .ok_or_else(|| LabError::InvalidArgument(format!("case {k}: reference not in the class")))?;
            let mut r = CheckResult::new("pcov_equivalence", GRID_TOL);
            for &zeta in zeta_list {
                let partial = partial_class_with(&occs, idx, zeta)?;
                let closed = p_cov_with(&occs, &partial)?.value;
                let grid = inf_form_p_cov(&occs, &partial.members)?;
                r.observe(-(grid - closed).abs(), || {
                    format!("case {k}, zeta = {zeta}: grid {grid:.6}, closed form {closed:.6}")
                });
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckResult::merge("pcov_equivalence", GRID_TOL, parts))
}

/// `||phi||^2 / (lambda + t - 1) <= ||phi||^2_{Lambda^-1} <= 1/lambda` at every
/// checkpoint of an LSVI trace with unit-norm features.
pub fn verify_phi_bounds(trace: &RegretTrace) -> CheckResult {
    let mut r = CheckResult::new("phi_bounds", 1e-9);
    for row in &trace.rows {
        let (Some(lo), Some(hi), Some(lambda)) = (row.min_phi_norm_sq, row.max_phi_norm_sq, row.lambda) else {
            continue;
        };
        let lower = 1.0 / (lambda + row.t as f64 - 1.0);
        r.observe(lo - lower, || format!("t = {}: min {lo:e} below 1/(lambda + t - 1) = {lower:e}", row.t));
        r.observe(1.0 / lambda - hi, || format!("t = {}: max {hi:e} above 1/lambda = {:e}", row.t, 1.0 / lambda));
    }
    if r.trials == 0 {
        return CheckResult::skipped("phi_bounds", "trace has no feature-norm columns");
    }
    r.finish()
}

/// The same sandwich over every visited pair of a run, with the lower end
/// scaled by `||phi||^2` so that non-unit features are covered.
pub fn verify_phi_bounds_run(run: &LsviRun) -> CheckResult {
    let s = &run.sandwich;
    if s.observations == 0 {
        return CheckResult::skipped("phi_bounds", "no episodes");
    }
    let mut r = CheckResult::new("phi_bounds", 1e-9);
    r.observe(s.lower_margin, || format!("seed {}: lower end", run.trace.seed));
    r.observe(s.upper_margin, || format!("seed {}: upper end", run.trace.seed));
    r.trials = s.observations;
    r.finish()
}

/// `Var <= min{(M - m)^2 / 4, 1/(4 lambda^2)}` at every grid point.
pub fn verify_popoviciu(diag: &AssumptionDiagnostics) -> CheckResult {
    let mut r = CheckResult::new("popoviciu", 1e-12);
    for (k, &lambda) in diag.lambda_grid.iter().enumerate() {
        let var = diag.variance_samples[k];
        let bound = diag.popoviciu_bound[k].min(1.0 / (4.0 * lambda * lambda));
        r.observe(bound - var, || format!("lambda = {lambda}: variance {var:e}, bound {bound:e}"));
    }
    r.finish()
}

/// `sum_t x_t^T U_{t-1}^-1 x_t <= 2 d log(1 + T / (lambda d))` with
/// `U_t = lambda I + sum_{i <= t} x_i x_i^T`.
pub fn verify_elliptical_potential(seq: &[Vec<f64>], lambda: f64, d: usize) -> Result<CheckResult> {
    if !(lambda > 0.0) || d == 0 {
        return Err(LabError::InvalidArgument("lambda and d must be positive".into()));
    }
    let mut inv = DMatrix::<f64>::identity(d, d) / lambda;
    let mut lhs = 0.0;
    for (t, x) in seq.iter().enumerate() {
        if x.len() != d {
            return Err(LabError::DimensionMismatch(format!("vector {t} has length {}, expected {d}", x.len())));
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1.0 + NORM_SLACK {
            return Err(LabError::Validation(format!("vector {t} has norm {norm} > 1")));
        }
        let v = DVector::from_column_slice(x);
        let u = &inv * &v;
        let q = v.dot(&u);
        lhs += q;
        inv.ger(-1.0 / (1.0 + q), &u, &u, 1.0);
    }
    let n = seq.len() as f64;
    let rhs = 2.0 * d as f64 * (1.0 + n / (lambda * d as f64)).ln();
    let mut r = CheckResult::new("elliptical_potential", 1e-9);
    r.observe(rhs - lhs, || format!("T = {}, lambda = {lambda}, d = {d}: sum {lhs:.6} vs {rhs:.6}", seq.len()));
    r.details.insert("potential".into(), lhs);
    r.details.insert("bound".into(), rhs);
    Ok(r.finish())
}

/// Per-pair potential `sum_t rho_t(z) / (sum_{i<t} rho_i(z) + C mu(z))` for a
/// sequence with `rho_t(z) <= (C mu(z))^p`. Reports
/// `kappa = max_z sum / log(T + 1)` and passes iff `kappa <= 4`.
pub fn verify_per_sa_potential(seq: &[Vec<f64>], mu: &[f64], c: f64, p: f64) -> Result<CheckResult> {
    if !(c > 0.0) || !(p >= 1.0) {
        return Err(LabError::InvalidArgument("need C > 0 and p >= 1".into()));
    }
    let caps: Vec<f64> = mu.iter().map(|m| (c * m).powf(p)).collect();
    for (t, rho) in seq.iter().enumerate() {
        if rho.len() != mu.len() {
            return Err(LabError::DimensionMismatch(format!("distribution {t} has length {}", rho.len())));
        }
        if let Some(z) = (0..mu.len()).find(|&z| rho[z] > caps[z] * (1.0 + 1e-12) + 1e-15) {
            return Err(LabError::Validation(format!(
                "domination fails at t = {t}, z = {z}: rho = {} > (C mu)^p = {}",
                rho[z], caps[z]
            )));
        }
    }
    if seq.is_empty() {
        return Ok(CheckResult::skipped("per_sa_potential", "empty sequence"));
    }
    let mut sums = vec![0.0; mu.len()];
    let mut acc = vec![0.0; mu.len()];
    for rho in seq {
        for z in 0..mu.len() {
            let denom = acc[z] + c * mu[z];
            if rho[z] > 0.0 {
                sums[z] += rho[z] / denom;
            }
            acc[z] += rho[z];
        }
    }
    let log_t = (seq.len() as f64 + 1.0).ln();
    let (z_star, worst) = sums.iter().copied().enumerate().fold((0, 0.0), |b, (z, s)| if s > b.1 { (z, s) } else { b });
    let kappa = worst / log_t;
    let mut r = CheckResult::new("per_sa_potential", 0.0);
    r.observe(KAPPA_MAX - kappa, || format!("z = {z_star}: sum {worst:.6}, kappa {kappa:.4}"));
    r.details.insert("kappa".into(), kappa);
    Ok(r.finish())
}

/// A length-`n` sequence of distributions over `mu.len()` points with
/// `rho_t(z) <= (C mu(z))^p`: random simplex draws, scaled and clipped at the
/// caps, with the scale found by bisection so that each sums to one.
pub fn admissible_sequence<R: Rng + ?Sized>(
    mu: &[f64],
    c: f64,
    p: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let caps: Vec<f64> = mu.iter().map(|m| (c * m).powf(p)).collect();
    if caps.iter().sum::<f64>() < 1.0 {
        return Err(LabError::InvalidArgument("caps (C mu)^p sum below one; no admissible distribution".into()));
    }
    let mass = |w: &[f64], s: f64| -> f64 { w.iter().zip(&caps).map(|(x, cap)| (s * x).min(*cap)).sum() };
    (0..n)
        .map(|_| {
            let w = crate::lsvi::simplex_point(mu.len(), rng);
            let (mut lo, mut hi) = (0.0, 1.0);
            while mass(&w, hi) < 1.0 {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(LabError::Validation("could not reach unit mass under the caps".into()));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mass(&w, mid) < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let rho: Vec<f64> = w.iter().zip(&caps).map(|(x, cap)| (hi * x).min(*cap)).collect();
            let total: f64 = rho.iter().sum();
            // renormalising can only shrink entries that were clipped at total >= 1
            Ok(rho.iter().map(|x| x / total).collect())
        })
        .collect()
}

/// `E_rho[phi^T Lambda^-1 phi] <= ((d + lambda)^2 / (d^2 gamma^2 lambda)) E_mu[phi^T Lambda^-1 phi]^2`
/// at every recorded checkpoint and step.
pub fn verify_rhomu(run: &LsviRun, gamma: f64) -> CheckResult {
    if !(gamma > 1e-12) {
        return CheckResult::skipped("rhomu", "feature coverage gamma is zero");
    }
    if run.coverage.is_empty() {
        return CheckResult::skipped("rhomu", "run recorded no coverage terms");
    }
    let d = run.dim as f64;
    let mut r = CheckResult::new("rhomu", 1e-12);
    for rec in &run.coverage {
        let factor = (d + rec.lambda).powi(2) / (d * d * gamma * gamma * rec.lambda);
        let rhs = factor * rec.e_mu * rec.e_mu;
        r.observe(rhs - rec.e_rho, || {
            format!("seed {}, t = {}, h = {}: E_rho {:e} vs bound {rhs:e}", run.trace.seed, rec.t, rec.h, rec.e_rho)
        });
    }
    r.finish()
}

/// Cumulative regret at or below the recorded optimism bound at every
/// checkpoint.
pub fn verify_regret_dominance(trace: &RegretTrace) -> CheckResult {
    let mut r = CheckResult::new("regret_dominance", 1e-9);
    for row in &trace.rows {
        if let Some(bound) = row.optimism_bound {
            r.observe(bound - row.cum_regret, || format!("t = {}: regret {} vs bound {bound}", row.t, row.cum_regret));
        }
    }
    if r.trials == 0 {
        return CheckResult::skipped("regret_dominance", "trace has no bound column");
    }
    r.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn compositions_count() {
        let mut n = 0;
        compositions(3, 4, &mut |_| n += 1);
        assert_eq!(n, 15);
    }

    #[test]
    fn grid_inf_matches_sum_of_sup() {
        let rows = vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.2, 0.8, 0.0]];
        let v = grid_inf(&rows).unwrap();
        assert!((v - 1.8).abs() < 1e-3, "{v}");
    }

    #[test]
    fn harmonic_potential_for_repeated_vector() {
        let seq = vec![vec![1.0, 0.0]; 100];
        let r = verify_elliptical_potential(&seq, 1.0, 2).unwrap();
        let harmonic: f64 = (1..=100).map(|t| 1.0 / t as f64).sum();
        assert!((r.details["potential"] - harmonic).abs() < 1e-9);
        assert!(r.pass);
    }

    #[test]
    fn zero_vectors_have_zero_potential() {
        let r = verify_elliptical_potential(&vec![vec![0.0; 3]; 10], 1.0, 3).unwrap();
        assert_eq!(r.details["potential"], 0.0);
        assert!(r.pass);
    }

    #[test]
    fn long_vectors_are_rejected() {
        assert!(verify_elliptical_potential(&[vec![1.0, 1.0]], 1.0, 2).is_err());
    }

    #[test]
    fn constant_sequence_potential_is_harmonic() {
        let mu = vec![0.5, 0.5];
        let c = 2.0;
        let seq = vec![vec![1.0, 0.0]; 50];
        // p = 1 boundary: rho(0) = C mu(0) = 1
        let r = verify_per_sa_potential(&seq, &mu, c, 1.0).unwrap();
        let harmonic: f64 = (1..=50).map(|t| 1.0 / t as f64).sum();
        assert!((r.details["kappa"] - harmonic / 51f64.ln()).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn domination_violation_names_the_pair() {
        let err = verify_per_sa_potential(&[vec![0.2, 0.8], vec![0.9, 0.1]], &[0.5, 0.5], 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("t = 0, z = 1"), "{err}");
    }

    #[test]
    fn admissible_sequences_respect_caps() {
        let mu = vec![0.1, 0.2, 0.3, 0.4];
        let mut rng = seeded(3);
        let (c, p) = (2.5, 2.0);
        let seq = admissible_sequence(&mu, c, p, 200, &mut rng).unwrap();
        for rho in &seq {
            assert!((rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (r, m) in rho.iter().zip(&mu) {
                assert!(*r <= (c * m).powf(p) * (1.0 + 1e-12));
            }
        }
        assert!(verify_per_sa_potential(&seq, &mu, c, p).unwrap().pass);
    }

    #[test]
    fn popoviciu_is_tight_for_two_points() {
        let diag = AssumptionDiagnostics {
            gamma: 0.0,
            alpha_hat: None,
            lambda_grid: vec![1.0],
            variance_samples: vec![0.25 * 0.4 * 0.4],
            popoviciu_bound: vec![0.4 * 0.4 / 4.0],
            max_value: vec![0.5],
            min_value: vec![0.1],
            worst_step: vec![0],
        };
        let r = verify_popoviciu(&diag);
        assert!(r.pass);
        assert!(r.margin.abs() < 1e-15);
    }
}
