use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::mdp::{LinearMdp, TabularMdp};
use crate::rng::{seeded, LabRng};
use crate::{LabError, Result};

/// Share of the squared feature norm carried by the all-ones direction in
/// the low-variance construction.
const SHELL_MEAN_SHARE: f64 = 0.85;
const MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureStructure {
    /// Features drawn uniformly from the probability simplex; norms vary.
    Generic,
    /// Unit-norm features `(c/d) 1 + r u` with `u` orthogonal to `1`: every
    /// feature has the same norm, so `||phi||^2_{Lambda^-1}` varies only
    /// through the data-dependent part of `Lambda`.
    LowVariance,
    /// `d = S * A` indicator features; the model is an arbitrary tabular MDP.
    OneHot,
}

impl std::str::FromStr for FeatureStructure {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(FeatureStructure::Generic),
            "low-variance" | "low_variance" => Ok(FeatureStructure::LowVariance),
            "one-hot" | "one_hot" => Ok(FeatureStructure::OneHot),
            other => Err(LabError::InvalidArgument(format!("unknown feature structure `{other}`"))),
        }
    }
}

/// Uniform draw from the probability simplex of dimension `n`.
pub(crate) fn simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

fn shell_feature(d: usize, rng: &mut LabRng) -> Result<Vec<f64>> {
    let c_over_d = (SHELL_MEAN_SHARE / d as f64).sqrt();
    let radius = (1.0 - SHELL_MEAN_SHARE).sqrt();
    for _ in 0..MAX_RETRIES {
        let mut u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let mean = u.iter().sum::<f64>() / d as f64;
        u.iter_mut().for_each(|x| *x -= mean);
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        let phi: Vec<f64> = u.iter().map(|x| c_over_d + radius * x / norm).collect();
        if phi.iter().all(|&x| x >= 0.0) {
            return Ok(phi);
        }
    }
    Err(LabError::Validation(format!("no nonnegative unit-norm feature found in {MAX_RETRIES} draws for d = {d}")))
}

/// Random linear MDP with `s_init = 0` and rewards normalised so that every
/// return lies in `[0, 1]`.
///
/// Features sum to a constant `c` over coordinates, `psi_h` holds `d` next-state
/// distributions scaled by `1/c`, and `theta_h` lies in `[0, 1/(c H)]^d`, so
/// the induced kernel and rewards are valid by construction.
pub fn make_random_linear_mdp(
    d: usize,
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    structure: FeatureStructure,
    seed: u64,
) -> Result<LinearMdp> {
    if d == 0 || n_states == 0 || n_actions == 0 || horizon == 0 {
        return Err(LabError::InvalidArgument("d, S, A and H must be positive".into()));
    }
    let pairs = n_states * n_actions;
    if d > pairs {
        return Err(LabError::InvalidArgument(format!("d = {d} exceeds S * A = {pairs}")));
    }
    let mut rng = seeded(seed);
    if structure == FeatureStructure::OneHot {
        if d != pairs {
            return Err(LabError::InvalidArgument(format!("one-hot features need d = S * A = {pairs}, got {d}")));
        }
        let p: Vec<f64> = (0..horizon * pairs).flat_map(|_| simplex_point(n_states, &mut rng)).collect();
        let r: Vec<f64> = (0..horizon * pairs).map(|_| rng.gen::<f64>() / horizon as f64).collect();
        let tab = TabularMdp::from_flat(horizon, n_states, n_actions, 0, p, r)?;
        return LinearMdp::one_hot(&tab);
    }
    if structure == FeatureStructure::LowVariance && d < 2 {
        return Err(LabError::InvalidArgument("low-variance features need d >= 2".into()));
    }
    let (phi, scale): (Vec<f64>, f64) = match structure {
        FeatureStructure::Generic => ((0..pairs).flat_map(|_| simplex_point(d, &mut rng)).collect(), 1.0),
        FeatureStructure::LowVariance => {
            let mut phi = Vec::with_capacity(pairs * d);
            for _ in 0..pairs {
                phi.extend(shell_feature(d, &mut rng)?);
            }
            (phi, (SHELL_MEAN_SHARE * d as f64).sqrt())
        }
        FeatureStructure::OneHot => unreachable!(),
    };
    let mut psi = vec![0.0; horizon * n_states * d];
    for h in 0..horizon {
        for k in 0..d {
            let q = simplex_point(n_states, &mut rng);
            for (s, qs) in q.iter().enumerate() {
                psi[(h * n_states + s) * d + k] = qs / scale;
            }
        }
    }
    let theta: Vec<f64> = (0..horizon * d).map(|_| rng.gen::<f64>() / (scale * horizon as f64)).collect();
    LinearMdp::from_flat(horizon, n_states, n_actions, 0, d, phi, psi, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_models_are_valid_and_deterministic() {
        for structure in [FeatureStructure::Generic, FeatureStructure::LowVariance] {
            let a = make_random_linear_mdp(4, 5, 2, 3, structure, 7).unwrap();
            let b = make_random_linear_mdp(4, 5, 2, 3, structure, 7).unwrap();
            assert_eq!(a, b);
            assert!(a.tabular().is_normalized());
        }
    }

    #[test]
    fn shell_features_have_unit_norm() {
        let m = make_random_linear_mdp(6, 4, 3, 2, FeatureStructure::LowVariance, 3).unwrap();
        for z in 0..12 {
            let n: f64 = m.phi_pair(z).iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_requires_full_dimension() {
        assert!(make_random_linear_mdp(3, 2, 2, 2, FeatureStructure::OneHot, 1).is_err());
        let m = make_random_linear_mdp(4, 2, 2, 2, FeatureStructure::OneHot, 1).unwrap();
        assert_eq!(m.dim(), 4);
    }

    #[test]
    fn dimension_above_pair_count_is_rejected() {
        assert!(make_random_linear_mdp(5, 2, 2, 2, FeatureStructure::Generic, 1).is_err());
    }
}
