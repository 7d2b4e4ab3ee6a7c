use serde::{Deserialize, Serialize};

use super::PROB_TOL;
use crate::{LabError, Result};

/// How rewards are realised when sampling.
///
/// The stored reward tensor is always the mean reward; `Bernoulli` draws
/// `r ~ Bernoulli(mean)` in [`sample_episode`](super::sample_episode) so that
/// bandit-style instances carry observation noise without changing `Q*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardNoise {
    #[default]
    Deterministic,
    Bernoulli,
}

/// Tabular finite-horizon MDP with a fixed initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    s_init: usize,
    // [h][s][a][s']
    transitions: Vec<f64>,
    // [h][s][a]
    rewards: Vec<f64>,
    reward_noise: RewardNoise,
    normalized: bool,
}

impl TabularMdp {
    /// Build from nested `[h][s][a][s']` transitions and `[h][s][a]` rewards.
    pub fn new(s_init: usize, transitions: Vec<Vec<Vec<Vec<f64>>>>, rewards: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let horizon = transitions.len();
        if horizon == 0 {
            return Err(LabError::Validation("horizon must be positive".into()));
        }
        let n_states = transitions[0].len();
        let n_actions = transitions[0].first().map_or(0, |row| row.len());
        let mut flat_p = Vec::with_capacity(horizon * n_states * n_actions * n_states);
        for (h, step) in transitions.iter().enumerate() {
            if step.len() != n_states {
                return Err(LabError::Validation(format!("P[{h}] has {} states, expected {n_states}", step.len())));
            }
            for (s, row) in step.iter().enumerate() {
                if row.len() != n_actions {
                    return Err(LabError::Validation(format!(
                        "P[{h}][{s}] has {} actions, expected {n_actions}",
                        row.len()
                    )));
                }
                for (a, dist) in row.iter().enumerate() {
                    if dist.len() != n_states {
                        return Err(LabError::Validation(format!(
                            "P[{h}][{s}][{a}] has length {}, expected {n_states}",
                            dist.len()
                        )));
                    }
                    flat_p.extend_from_slice(dist);
                }
            }
        }
        if rewards.len() != horizon {
            return Err(LabError::Validation(format!("r has {} steps, expected {horizon}", rewards.len())));
        }
        let mut flat_r = Vec::with_capacity(horizon * n_states * n_actions);
        for (h, step) in rewards.iter().enumerate() {
            if step.len() != n_states || step.iter().any(|row| row.len() != n_actions) {
                return Err(LabError::Validation(format!("r[{h}] is not a {n_states}x{n_actions} table")));
            }
            for row in step {
                flat_r.extend_from_slice(row);
            }
        }
        Self::from_flat(horizon, n_states, n_actions, s_init, flat_p, flat_r)
    }

    /// Build from flat row-major tensors (`[h][s][a][s']` and `[h][s][a]`).
    pub fn from_flat(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        s_init: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        if horizon == 0 || n_states == 0 || n_actions == 0 {
            return Err(LabError::Validation(format!(
                "H, S, A must be positive (got {horizon}, {n_states}, {n_actions})"
            )));
        }
        if s_init >= n_states {
            return Err(LabError::Validation(format!("s_init = {s_init} out of range for S = {n_states}")));
        }
        let pairs = horizon * n_states * n_actions;
        if transitions.len() != pairs * n_states || rewards.len() != pairs {
            return Err(LabError::Validation(format!(
                "tensor sizes {} / {} do not match H={horizon}, S={n_states}, A={n_actions}",
                transitions.len(),
                rewards.len()
            )));
        }
        for idx in 0..pairs {
            let (h, s, a) = (idx / (n_states * n_actions), (idx / n_actions) % n_states, idx % n_actions);
            let dist = &transitions[idx * n_states..(idx + 1) * n_states];
            if let Some(bad) = dist.iter().position(|p| !p.is_finite() || *p < 0.0) {
                return Err(LabError::Validation(format!(
                    "P[{h}][{s}][{a}][{bad}] = {} is not a probability",
                    dist[bad]
                )));
            }
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(LabError::Validation(format!("P[{h}][{s}][{a}] sums to {total}, expected 1")));
            }
            let r = rewards[idx];
            if !(0.0..=1.0).contains(&r) {
                return Err(LabError::Validation(format!("r[{h}][{s}][{a}] = {r} outside [0, 1]")));
            }
        }
        let mut mdp = TabularMdp {
            horizon,
            n_states,
            n_actions,
            s_init,
            transitions,
            rewards,
            reward_noise: RewardNoise::Deterministic,
            normalized: false,
        };
        mdp.normalized = mdp.max_cumulative_reward() <= 1.0 + PROB_TOL;
        Ok(mdp)
    }

    pub fn with_reward_noise(mut self, noise: RewardNoise) -> Self {
        self.reward_noise = noise;
        self
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

    /// `S * A`.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn s_init(&self) -> usize {
        self.s_init
    }

    pub fn reward_noise(&self) -> RewardNoise {
        self.reward_noise
    }

    /// Whether every trajectory collects total reward at most one.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Ceiling on any value function: 1 for normalized MDPs, `H` otherwise.
    pub fn value_ceiling(&self) -> f64 {
        if self.normalized {
            1.0
        } else {
            self.horizon as f64
        }
    }

    #[inline]
    pub fn next_dist(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let idx = (h * self.n_states + s) * self.n_actions + a;
        &self.transitions[idx * self.n_states..(idx + 1) * self.n_states]
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[(h * self.n_states + s) * self.n_actions + a]
    }

    /// Mean rewards at step `h` as a flat `[s][a]` slice.
    pub fn rewards_at(&self, h: usize) -> &[f64] {
        let n = self.n_pairs();
        &self.rewards[h * n..(h + 1) * n]
    }

    pub fn transitions_flat(&self) -> &[f64] {
        &self.transitions
    }

    pub fn rewards_flat(&self) -> &[f64] {
        &self.rewards
    }

    /// Largest total reward collectable along any trajectory.
    pub fn max_cumulative_reward(&self) -> f64 {
        let mut v_next = vec![0.0; self.n_states];
        for h in (0..self.horizon).rev() {
            let v: Vec<f64> = (0..self.n_states)
                .map(|s| {
                    (0..self.n_actions)
                        .map(|a| {
                            let reachable_max = self
                                .next_dist(h, s, a)
                                .iter()
                                .zip(&v_next)
                                .filter(|(p, _)| **p > 0.0)
                                .map(|(_, v)| *v)
                                .fold(0.0, f64::max);
                            self.reward(h, s, a) + reachable_max
                        })
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            v_next = v;
        }
        v_next[self.s_init]
    }

    pub fn check_indices(&self, h: usize, s: usize, a: usize) -> Result<()> {
        if h >= self.horizon || s >= self.n_states || a >= self.n_actions {
            return Err(LabError::OutOfRange(format!(
                "(h={h}, s={s}, a={a}) for H={}, S={}, A={}",
                self.horizon, self.n_states, self.n_actions
            )));
        }
        Ok(())
    }
}
