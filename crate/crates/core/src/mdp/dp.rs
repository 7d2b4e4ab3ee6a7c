use super::{Policy, TabularMdp};
use crate::Result;

/// Per-step state-action distribution `rho_h(s, a)` of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    rho: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn from_flat(horizon: usize, n_states: usize, n_actions: usize, rho: Vec<f64>) -> Self {
        assert_eq!(rho.len(), horizon * n_states * n_actions);
        OccupancyMeasure { horizon, n_states, n_actions, rho }
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

    /// Step-`h` slice as a flat `[s][a]` vector.
    pub fn step(&self, h: usize) -> &[f64] {
        let n = self.n_pairs();
        &self.rho[h * n..(h + 1) * n]
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rho[(h * self.n_states + s) * self.n_actions + a]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.rho
    }

    /// Marginal over actions at step `h`.
    pub fn state_marginal(&self, h: usize) -> Vec<f64> {
        self.step(h).chunks(self.n_actions).map(|row| row.iter().sum()).collect()
    }
}

/// Exact occupancy measures by forward propagation from `s_init`.
pub fn occupancy_measures(mdp: &TabularMdp, policy: &Policy) -> Result<OccupancyMeasure> {
    policy.check_compatible(mdp)?;
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut rho = vec![0.0; hz * ns * na];
    let mut state_dist = vec![0.0; ns];
    state_dist[mdp.s_init()] = 1.0;
    for h in 0..hz {
        let base = h * ns * na;
        for s in 0..ns {
            if state_dist[s] == 0.0 {
                continue;
            }
            for a in 0..na {
                rho[base + s * na + a] = state_dist[s] * policy.prob(h, s, a);
            }
        }
        if h + 1 < hz {
            let mut next = vec![0.0; ns];
            for s in 0..ns {
                for a in 0..na {
                    let mass = rho[base + s * na + a];
                    if mass == 0.0 {
                        continue;
                    }
                    for (n, p) in next.iter_mut().zip(mdp.next_dist(h, s, a)) {
                        *n += mass * p;
                    }
                }
            }
            state_dist = next;
        }
    }
    Ok(OccupancyMeasure::from_flat(hz, ns, na, rho))
}

/// `max_pi Pr^pi[s_h = s]` for every `(h, s)`, flat `[h][s]`, over
/// deterministic Markov policies.
///
/// For each target `(h, s)` a backward max-reachability recursion is run over
/// the steps before `h`.
pub fn reachability_table(mdp: &TabularMdp) -> Vec<f64> {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut table = vec![0.0; hz * ns];
    for h in 0..hz {
        for target in 0..ns {
            let mut value = vec![0.0; ns];
            value[target] = 1.0;
            for k in (0..h).rev() {
                value = (0..ns)
                    .map(|x| (0..na).map(|a| dot(mdp.next_dist(k, x, a), &value)).fold(f64::NEG_INFINITY, f64::max))
                    .collect();
            }
            table[h * ns + target] = value[mdp.s_init()];
        }
    }
    table
}

/// Supremum over all deterministic non-stationary policies of
/// `rho_h^pi(s, a)`. The action at `s` is free, so this equals the maximal
/// probability of reaching `s` at step `h`.
pub fn reach_sup(mdp: &TabularMdp, h: usize, s: usize, a: usize) -> Result<f64> {
    mdp.check_indices(h, s, a)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut value = vec![0.0; ns];
    value[s] = 1.0;
    for k in (0..h).rev() {
        value = (0..ns)
            .map(|x| (0..na).map(|b| dot(mdp.next_dist(k, x, b), &value)).fold(f64::NEG_INFINITY, f64::max))
            .collect();
    }
    Ok(value[mdp.s_init()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalValues {
    /// `[h][s]` for `h < H`.
    pub v: Vec<f64>,
    /// `[h][s][a]`.
    pub q: Vec<f64>,
    pub policy: Policy,
}

impl OptimalValues {
    pub fn v_init(&self, mdp: &TabularMdp) -> f64 {
        self.v[mdp.s_init()]
    }

    /// Step-`h` slice of `Q*` as flat `[s][a]`.
    pub fn q_step(&self, h: usize, n_pairs: usize) -> &[f64] {
        &self.q[h * n_pairs..(h + 1) * n_pairs]
    }
}

/// Backward induction for `V*`, `Q*` and the greedy optimal policy.
pub fn optimal_values(mdp: &TabularMdp) -> OptimalValues {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let n = ns * na;
    let mut q = vec![0.0; hz * n];
    let mut v = vec![0.0; hz * ns];
    for h in (0..hz).rev() {
        let q_h =
            if h + 1 == hz { mdp.rewards_at(h).to_vec() } else { bellman_apply(mdp, &q[(h + 1) * n..(h + 2) * n], h) };
        for s in 0..ns {
            v[h * ns + s] = q_h[s * na..(s + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        q[h * n..(h + 1) * n].copy_from_slice(&q_h);
    }
    let policy = Policy::greedy(hz, ns, na, &q);
    OptimalValues { v, q, policy }
}

/// `(T_h f)(s, a) = r_h(s, a) + E_{s' ~ P_h(.|s,a)} max_a' f(s', a')`.
///
/// `f_next` is a flat `[s][a]` table for step `h + 1`. At the last step the
/// next-step function is identically zero and `f_next` is ignored.
pub fn bellman_apply(mdp: &TabularMdp, f_next: &[f64], h: usize) -> Vec<f64> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let rewards = mdp.rewards_at(h);
    if h + 1 >= mdp.horizon() {
        return rewards.to_vec();
    }
    let v_next: Vec<f64> = f_next.chunks(na).map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut out = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            out[s * na + a] = rewards[s * na + a] + dot(mdp.next_dist(h, s, a), &v_next);
        }
    }
    out
}

/// `V_1^pi(s_init)`, exactly, via the occupancy measure.
pub fn policy_value(mdp: &TabularMdp, policy: &Policy) -> Result<f64> {
    let occ = occupancy_measures(mdp, policy)?;
    Ok((0..mdp.horizon()).map(|h| dot(occ.step(h), mdp.rewards_at(h))).sum())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::enumerate_policies;

    /// Two states; action 1 moves s0 -> s1, action 0 stays; s1 absorbing.
    fn chain() -> TabularMdp {
        let step = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0], vec![0.0, 1.0]]];
        let r = vec![vec![0.0, 0.0], vec![0.0, 0.5]];
        TabularMdp::new(0, vec![step.clone(), step], vec![r.clone(), r]).unwrap()
    }

    #[test]
    fn single_trajectory_occupancy() {
        let mdp = TabularMdp::new(0, vec![vec![vec![vec![1.0]]]; 3], vec![vec![vec![0.0]]; 3]).unwrap();
        let pi = Policy::constant(3, 1, 1, 0).unwrap();
        let occ = occupancy_measures(&mdp, &pi).unwrap();
        for h in 0..3 {
            assert_eq!(occ.get(h, 0, 0), 1.0);
        }
    }

    #[test]
    fn chain_reaches_s1() {
        let mdp = chain();
        let pi = Policy::constant(2, 2, 2, 1).unwrap();
        let occ = occupancy_measures(&mdp, &pi).unwrap();
        assert_eq!(occ.get(1, 1, 1), 1.0);
        assert_eq!(reach_sup(&mdp, 1, 1, 0).unwrap(), 1.0);
        assert_eq!(reach_sup(&mdp, 0, 0, 1).unwrap(), 1.0);
        assert_eq!(reach_sup(&mdp, 0, 1, 1).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mdp = chain();
        let pi = Policy::constant(3, 2, 2, 0).unwrap();
        assert!(occupancy_measures(&mdp, &pi).is_err());
    }

    #[test]
    fn zero_reward_optimal_policy_is_all_zero() {
        let step = vec![vec![vec![0.5, 0.5]; 2]; 2];
        let mdp = TabularMdp::new(0, vec![step.clone(), step], vec![vec![vec![0.0; 2]; 2]; 2]).unwrap();
        let opt = optimal_values(&mdp);
        assert!(opt.v.iter().all(|v| *v == 0.0));
        assert_eq!(opt.policy, Policy::constant(2, 2, 2, 0).unwrap());
    }

    #[test]
    fn bandit_optimal_arm() {
        let mdp = TabularMdp::new(0, vec![vec![vec![vec![1.0], vec![1.0]]]], vec![vec![vec![0.9, 0.1]]]).unwrap();
        let opt = optimal_values(&mdp);
        assert_eq!(opt.v_init(&mdp), 0.9);
        assert_eq!(opt.policy.action(0, 0), Some(0));
    }

    #[test]
    fn bellman_of_zero_is_reward() {
        let mdp = chain();
        assert_eq!(bellman_apply(&mdp, &[0.0; 4], 0), mdp.rewards_at(0).to_vec());
        assert_eq!(bellman_apply(&mdp, &[7.0; 4], 1), mdp.rewards_at(1).to_vec());
    }

    #[test]
    fn bellman_of_next_qstar_is_qstar() {
        let mdp = chain();
        let opt = optimal_values(&mdp);
        let q0 = bellman_apply(&mdp, opt.q_step(1, 4), 0);
        assert_eq!(q0, opt.q_step(0, 4).to_vec());
    }

    #[test]
    fn chain_value_dominates_every_policy() {
        let mdp = chain();
        let opt = optimal_values(&mdp);
        let class = enumerate_policies(&mdp, 100).unwrap();
        for pi in class.policies().unwrap() {
            assert!(policy_value(&mdp, pi).unwrap() <= opt.v_init(&mdp) + 1e-12);
        }
    }
}
