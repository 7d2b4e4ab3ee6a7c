use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::FunctionClass;
use crate::lsvi::simplex_point;
use crate::mdp::{optimal_values, RewardNoise, TabularMdp};
use crate::rng::seeded;
use crate::{LabError, Result};

fn check_positive(pairs: &[(&str, usize)]) -> Result<()> {
    for (name, v) in pairs {
        if *v == 0 {
            return Err(LabError::InvalidArgument(format!("{name} must be positive")));
        }
    }
    Ok(())
}

/// Dirichlet(1) transitions and uniform rewards scaled by `1/H`, so returns
/// lie in `[0, 1]`. `s_init = 0`.
pub fn random_tabular(n_states: usize, n_actions: usize, horizon: usize, seed: u64) -> Result<TabularMdp> {
    check_positive(&[("S", n_states), ("A", n_actions), ("H", horizon)])?;
    let mut rng = seeded(seed);
    let pairs = horizon * n_states * n_actions;
    let p: Vec<f64> = (0..pairs).flat_map(|_| simplex_point(n_states, &mut rng)).collect();
    let r: Vec<f64> = (0..pairs).map(|_| rng.gen::<f64>() / horizon as f64).collect();
    TabularMdp::from_flat(horizon, n_states, n_actions, 0, p, r)
}

/// Combination lock: state 0 is "on the lock", state 1 absorbing. At every
/// step one secret action keeps the agent on the lock and every other action
/// drops it into the absorbing state. Reward 1 only for the secret action at
/// the last step while still on the lock.
pub fn chain(n_actions: usize, horizon: usize, seed: u64) -> Result<TabularMdp> {
    check_positive(&[("A", n_actions), ("H", horizon)])?;
    let mut rng = seeded(seed);
    let secret: Vec<usize> = (0..horizon).map(|_| rng.gen_range(0..n_actions)).collect();
    let (ns, na) = (2, n_actions);
    let mut p = vec![0.0; horizon * ns * na * ns];
    let mut r = vec![0.0; horizon * ns * na];
    for h in 0..horizon {
        for s in 0..ns {
            for a in 0..na {
                let idx = (h * ns + s) * na + a;
                let next = if s == 0 && a == secret[h] { 0 } else { 1 };
                p[idx * ns + next] = 1.0;
                if h + 1 == horizon && s == 0 && a == secret[h] {
                    r[idx] = 1.0;
                }
            }
        }
    }
    TabularMdp::from_flat(horizon, ns, na, 0, p, r)
}

/// Block MDP: `latents` hidden states, each emitting its own block of
/// `obs_per_latent` observations. Observation `l * obs_per_latent + o` is
/// emitted from latent `l`; dynamics and rewards depend on the latent only.
/// Starts in observation 0 of latent 0.
pub fn block_mdp(
    latents: usize,
    obs_per_latent: usize,
    n_actions: usize,
    horizon: usize,
    seed: u64,
) -> Result<TabularMdp> {
    check_positive(&[
        ("latent states", latents),
        ("observations per latent", obs_per_latent),
        ("A", n_actions),
        ("H", horizon),
    ])?;
    let mut rng = seeded(seed);
    let ns = latents * obs_per_latent;
    let na = n_actions;
    let emission: Vec<Vec<f64>> = (0..latents).map(|_| simplex_point(obs_per_latent, &mut rng)).collect();
    let mut p = vec![0.0; horizon * ns * na * ns];
    let mut r = vec![0.0; horizon * ns * na];
    for h in 0..horizon {
        for l in 0..latents {
            for a in 0..na {
                let next_latent = simplex_point(latents, &mut rng);
                let reward = rng.gen::<f64>() / horizon as f64;
                for o in 0..obs_per_latent {
                    let idx = (h * ns + l * obs_per_latent + o) * na + a;
                    r[idx] = reward;
                    for (l2, pl) in next_latent.iter().enumerate() {
                        for (o2, q) in emission[l2].iter().enumerate() {
                            p[idx * ns + l2 * obs_per_latent + o2] = pl * q;
                        }
                    }
                }
            }
        }
    }
    TabularMdp::from_flat(horizon, ns, na, 0, p, r)
}

/// One-state, one-step bandit with Bernoulli rewards of the given means.
pub fn bandit(means: &[f64]) -> Result<TabularMdp> {
    check_positive(&[("arm count", means.len())])?;
    let n = means.len();
    TabularMdp::from_flat(1, 1, n, 0, vec![1.0; n], means.to_vec()).map(|m| m.with_reward_noise(RewardNoise::Bernoulli))
}

/// Product class for a bandit: every arm-value vector on the grid
/// `{0, 1/k, ..., 1}^A`, plus the true means.
pub fn bandit_class(mdp: &TabularMdp, grid: usize) -> Result<FunctionClass> {
    check_positive(&[("grid", grid)])?;
    let na = mdp.n_actions();
    let levels: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
    let total = levels.len().pow(na as u32);
    let mut funcs: Vec<Vec<f64>> = (0..total)
        .map(|mut c| {
            (0..na)
                .map(|_| {
                    let v = levels[c % levels.len()];
                    c /= levels.len();
                    v
                })
                .collect()
        })
        .collect();
    let means = mdp.rewards_at(0).to_vec();
    if !funcs.contains(&means) {
        funcs.push(means);
    }
    FunctionClass::product(1, na, 1.0, vec![funcs])
}

/// Parameters of a Bellman-closed tabular instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedClassSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    /// Seeds are `Q*_h + c u_h` for every offset `c`, with `u_h` the
    /// indicator of actions that are not greedy under `Q*`.
    pub offsets: Vec<f64>,
}

impl Default for ClosedClassSpec {
    fn default() -> Self {
        let mut offsets: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.002).collect();
        offsets.extend([0.12, 0.2, 0.3]);
        ClosedClassSpec { n_states: 3, n_actions: 2, horizon: 3, offsets }
    }
}

/// A random normalised MDP with a realizable, Bellman-complete class built
/// by closing perturbed copies of `Q*` under the Bellman operator.
pub fn closed_class_instance(spec: &ClosedClassSpec, seed: u64) -> Result<(TabularMdp, FunctionClass)> {
    let mdp = random_tabular(spec.n_states, spec.n_actions, spec.horizon, seed)?;
    let opt = optimal_values(&mdp);
    let n = mdp.n_pairs();
    let na = mdp.n_actions();
    let seeds: Vec<Vec<Vec<f64>>> = (0..mdp.horizon())
        .map(|h| {
            let q = opt.q_step(h, n);
            let greedy: Vec<usize> =
                (0..mdp.n_states()).map(|s| crate::mdp::argmax_lowest(&q[s * na..(s + 1) * na])).collect();
            let mut set = vec![q.to_vec()];
            for &c in &spec.offsets {
                set.push((0..n).map(|z| q[z] + if z % na == greedy[z / na] { 0.0 } else { c }).collect());
            }
            set
        })
        .collect();
    let class = FunctionClass::bellman_closure(&mdp, seeds, 1e-12)?;
    Ok((mdp, class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{check_completeness, check_realizability};
    use crate::coverage::c_cov;
    use crate::mdp::enumerate_policies;

    #[test]
    fn generators_are_deterministic_and_valid() {
        assert_eq!(random_tabular(3, 2, 3, 4).unwrap(), random_tabular(3, 2, 3, 4).unwrap());
        assert!(random_tabular(3, 2, 3, 4).unwrap().is_normalized());
        assert!(chain(3, 4, 1).unwrap().is_normalized());
        assert!(block_mdp(2, 3, 2, 3, 5).unwrap().is_normalized());
    }

    #[test]
    fn single_latent_block_mdp_has_coverability_at_most_a() {
        let m = block_mdp(1, 4, 3, 3, 2).unwrap();
        let v = c_cov(&m, &enumerate_policies(&m, 1 << 20).unwrap()).unwrap().value;
        assert!(v <= 3.0 + 1e-9, "{v}");
    }

    #[test]
    fn one_observation_per_latent_is_the_latent_mdp() {
        let m = block_mdp(3, 1, 2, 2, 8).unwrap();
        assert_eq!(m.n_states(), 3);
    }

    #[test]
    fn closed_instance_is_realizable_and_complete() {
        let spec = ClosedClassSpec { offsets: vec![0.05, 0.2], ..Default::default() };
        let (m, class) = closed_class_instance(&spec, 3).unwrap();
        assert!(check_realizability(&class, &m, 1e-9).unwrap().holds);
        assert!(check_completeness(&class, &m, 1e-9).unwrap().holds);
    }

    #[test]
    fn bandit_class_contains_the_means() {
        let m = bandit(&[0.35, 0.6]).unwrap();
        let c = bandit_class(&m, 10).unwrap();
        assert_eq!(c.step_len(0), 122);
    }
}
