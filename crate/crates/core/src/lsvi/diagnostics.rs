use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::coverage::DataDistribution;
use crate::mdp::{LinearMdp, Policy};
use crate::rng::seeded;
use crate::{LabError, Result};

/// `E_{mu_h}[phi phi^T]`.
pub fn feature_second_moment(mdp: &LinearMdp, mu_h: &[f64]) -> DMatrix<f64> {
    let d = mdp.dim();
    let mut m = DMatrix::zeros(d, d);
    for (z, &w) in mu_h.iter().enumerate() {
        if w > 0.0 {
            let v = nalgebra::DVector::from_column_slice(mdp.phi_pair(z));
            m.ger(w, &v, &v, 1.0);
        }
    }
    m
}

/// Smallest eigenvalue of a symmetric matrix, clamped at zero.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
}

/// `min_h lambda_min(E_{mu_h}[phi phi^T])`; zero means the coverage
/// condition fails.
pub fn feature_coverage_gamma(mdp: &LinearMdp, mu: &DataDistribution) -> Result<f64> {
    mu.check_dims(mdp.horizon(), mdp.n_states(), mdp.n_actions())?;
    Ok((0..mdp.horizon())
        .map(|h| min_eigenvalue(&feature_second_moment(mdp, mu.step(h))))
        .fold(f64::INFINITY, f64::min))
}

/// Variance profile of `||phi||^2_{Lambda^-1}` under `mu` across a
/// regularisation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionDiagnostics {
    pub gamma: f64,
    /// Slope of `log variance` against `-2 log lambda`; absent when fewer
    /// than two grid points have positive variance.
    pub alpha_hat: Option<f64>,
    pub lambda_grid: Vec<f64>,
    /// Per grid point, the largest per-step variance.
    pub variance_samples: Vec<f64>,
    /// `(M - m)^2 / 4` at the step attaining the variance.
    pub popoviciu_bound: Vec<f64>,
    pub max_value: Vec<f64>,
    pub min_value: Vec<f64>,
    /// Step attaining each variance sample.
    pub worst_step: Vec<usize>,
}

/// Mean and variance of `values` under weights `w` (two-pass).
fn weighted_moments(values: &[f64], w: &[f64]) -> (f64, f64) {
    let mean: f64 = values.iter().zip(w).map(|(x, p)| x * p).sum();
    let var: f64 = values.iter().zip(w).map(|(x, p)| p * (x - mean) * (x - mean)).sum();
    (mean, var.max(0.0))
}

/// For each `lambda`, `Lambda_h = lambda I + sum phi phi^T` over `t_sim`
/// uniformly random rollouts, and the exact variance of
/// `phi^T Lambda_h^-1 phi` under `mu_h` together with its range `[m, M]` over
/// the support of `mu_h`.
pub fn variance_profile(
    mdp: &LinearMdp,
    mu: &DataDistribution,
    lambda_grid: &[f64],
    t_sim: usize,
    seed: u64,
) -> Result<AssumptionDiagnostics> {
    mu.check_dims(mdp.horizon(), mdp.n_states(), mdp.n_actions())?;
    if lambda_grid.iter().any(|&l| !(l > 0.0)) {
        return Err(LabError::InvalidArgument("lambda grid values must be positive".into()));
    }
    let (hz, d) = (mdp.horizon(), mdp.dim());
    let tab = mdp.tabular();
    let na = tab.n_actions();
    let policy = Policy::uniform(hz, tab.n_states(), na);
    let mut rng = seeded(seed);
    let mut grams = vec![DMatrix::<f64>::zeros(d, d); hz];
    for _ in 0..t_sim {
        for tr in crate::mdp::sample_episode(tab, &policy, &mut rng) {
            let v = nalgebra::DVector::from_column_slice(mdp.phi_pair(tr.s * na + tr.a));
            grams[tr.h].ger(1.0, &v, &v, 1.0);
        }
    }
    let gamma = feature_coverage_gamma(mdp, mu)?;
    let mut out = AssumptionDiagnostics {
        gamma,
        alpha_hat: None,
        lambda_grid: lambda_grid.to_vec(),
        variance_samples: Vec::new(),
        popoviciu_bound: Vec::new(),
        max_value: Vec::new(),
        min_value: Vec::new(),
        worst_step: Vec::new(),
    };
    for &lambda in lambda_grid {
        let mut best: Option<(f64, f64, f64, usize)> = None;
        for (h, gram) in grams.iter().enumerate() {
            let inv = (gram + DMatrix::identity(d, d) * lambda)
                .cholesky()
                .ok_or(LabError::IllConditioned { step: h, episode: t_sim, condition: f64::INFINITY })?
                .inverse();
            let w = mu.step(h);
            let values: Vec<f64> = (0..w.len())
                .map(|z| {
                    let v = nalgebra::DVector::from_column_slice(mdp.phi_pair(z));
                    v.dot(&(&inv * &v))
                })
                .collect();
            let (_, var) = weighted_moments(&values, w);
            let support = values.iter().zip(w).filter(|(_, p)| **p > 0.0).map(|(x, _)| *x);
            let (lo, hi) = support.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), x| (l.min(x), u.max(x)));
            if best.is_none_or(|b| var > b.0) {
                best = Some((var, hi, lo, h));
            }
        }
        let (var, hi, lo, h) = best.expect("horizon is positive");
        out.variance_samples.push(var);
        out.popoviciu_bound.push((hi - lo) * (hi - lo) / 4.0);
        out.max_value.push(hi);
        out.min_value.push(lo);
        out.worst_step.push(h);
    }
    out.alpha_hat = fit_alpha(lambda_grid, &out.variance_samples);
    Ok(out)
}

/// Least-squares slope of `log variance` on `-2 log lambda`.
pub fn fit_alpha(lambda_grid: &[f64], variances: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        lambda_grid.iter().zip(variances).filter(|(_, v)| **v > 0.0).map(|(l, v)| (-2.0 * l.ln(), v.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsvi::{make_random_linear_mdp, FeatureStructure};

    #[test]
    fn one_hot_uniform_gamma_is_inverse_pair_count() {
        let m = make_random_linear_mdp(6, 3, 2, 2, FeatureStructure::OneHot, 1).unwrap();
        let mu = DataDistribution::uniform(2, 3, 2);
        let g = feature_coverage_gamma(&m, &mu).unwrap();
        assert!((g - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_has_zero_variance_and_no_alpha() {
        let m = make_random_linear_mdp(3, 3, 2, 2, FeatureStructure::Generic, 1).unwrap();
        let mut flat = vec![0.0; 2 * 6];
        flat[0] = 1.0;
        flat[6] = 1.0;
        let mu = DataDistribution::from_flat(2, 3, 2, flat).unwrap();
        let diag = variance_profile(&m, &mu, &[1.0, 10.0, 100.0], 20, 3).unwrap();
        assert!(diag.variance_samples.iter().all(|&v| v == 0.0));
        assert_eq!(diag.alpha_hat, None);
    }

    #[test]
    fn variances_respect_both_bounds() {
        let m = make_random_linear_mdp(4, 5, 2, 3, FeatureStructure::Generic, 2).unwrap();
        let mu = DataDistribution::uniform(3, 5, 2);
        let grid = [1.0, 3.0, 10.0, 30.0, 100.0];
        let diag = variance_profile(&m, &mu, &grid, 30, 4).unwrap();
        for (k, &l) in grid.iter().enumerate() {
            let v = diag.variance_samples[k];
            assert!(v <= diag.popoviciu_bound[k] + 1e-12);
            assert!(v <= 1.0 / (4.0 * l * l) + 1e-12);
        }
    }
}
