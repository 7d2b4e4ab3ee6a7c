use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{TabularMdp, PROB_TOL};
use crate::rng::sample_index;
use crate::{LabError, Result};

/// Non-stationary Markov policy over `H` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Policy {
    /// `actions[h * S + s]`.
    Deterministic { horizon: usize, n_states: usize, n_actions: usize, actions: Vec<usize> },
    /// `probs[(h * S + s) * A + a]`.
    Stochastic { horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64> },
}

impl Policy {
    pub fn deterministic(horizon: usize, n_states: usize, n_actions: usize, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != horizon * n_states {
            return Err(LabError::DimensionMismatch(format!(
                "policy table has {} entries, expected H*S = {}",
                actions.len(),
                horizon * n_states
            )));
        }
        if let Some(i) = actions.iter().position(|&a| a >= n_actions) {
            return Err(LabError::Validation(format!(
                "action {} at (h={}, s={}) out of range for A = {n_actions}",
                actions[i],
                i / n_states,
                i % n_states
            )));
        }
        Ok(Policy::Deterministic { horizon, n_states, n_actions, actions })
    }

    pub fn stochastic(horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != horizon * n_states * n_actions {
            return Err(LabError::DimensionMismatch(format!(
                "stochastic policy has {} entries, expected H*S*A = {}",
                probs.len(),
                horizon * n_states * n_actions
            )));
        }
        for (row_idx, row) in probs.chunks(n_actions).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0 || !p.is_finite()) || (total - 1.0).abs() > PROB_TOL {
                return Err(LabError::Validation(format!(
                    "policy row (h={}, s={}) is not a distribution",
                    row_idx / n_states,
                    row_idx % n_states
                )));
            }
        }
        Ok(Policy::Stochastic { horizon, n_states, n_actions, probs })
    }

    /// Plays action `a` everywhere.
    pub fn constant(horizon: usize, n_states: usize, n_actions: usize, a: usize) -> Result<Self> {
        Self::deterministic(horizon, n_states, n_actions, vec![a; horizon * n_states])
    }

    /// Uniformly random over actions at every state and step.
    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        Policy::Stochastic {
            horizon,
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; horizon * n_states * n_actions],
        }
    }

    /// Greedy policy of a `[h][s][a]` value table; ties go to the lowest action.
    pub fn greedy(horizon: usize, n_states: usize, n_actions: usize, q: &[f64]) -> Self {
        debug_assert_eq!(q.len(), horizon * n_states * n_actions);
        let actions = q.chunks(n_actions).map(argmax_lowest).collect();
        Policy::Deterministic { horizon, n_states, n_actions, actions }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Policy::Deterministic { horizon, .. } | Policy::Stochastic { horizon, .. } => *horizon,
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            Policy::Deterministic { n_states, .. } | Policy::Stochastic { n_states, .. } => *n_states,
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Policy::Deterministic { n_actions, .. } | Policy::Stochastic { n_actions, .. } => *n_actions,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Policy::Deterministic { .. })
    }

    /// Probability of taking `a` in state `s` at step `h`.
    #[inline]
    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        match self {
            Policy::Deterministic { n_states, actions, .. } => {
                if actions[h * n_states + s] == a {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Stochastic { n_states, n_actions, probs, .. } => probs[(h * n_states + s) * n_actions + a],
        }
    }

    /// The deterministic action, if this policy is deterministic.
    pub fn action(&self, h: usize, s: usize) -> Option<usize> {
        match self {
            Policy::Deterministic { n_states, actions, .. } => Some(actions[h * n_states + s]),
            Policy::Stochastic { .. } => None,
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, h: usize, s: usize, rng: &mut R) -> usize {
        match self {
            Policy::Deterministic { n_states, actions, .. } => actions[h * n_states + s],
            Policy::Stochastic { n_states, n_actions, probs, .. } => {
                let row = &probs[(h * n_states + s) * n_actions..(h * n_states + s + 1) * n_actions];
                sample_index(row, rng)
            }
        }
    }

    pub fn check_compatible(&self, mdp: &TabularMdp) -> Result<()> {
        if self.horizon() != mdp.horizon() || self.n_states() != mdp.n_states() || self.n_actions() != mdp.n_actions() {
            return Err(LabError::DimensionMismatch(format!(
                "policy is (H={}, S={}, A={}) but MDP is (H={}, S={}, A={})",
                self.horizon(),
                self.n_states(),
                self.n_actions(),
                mdp.horizon(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// Index of the largest entry, lowest index on ties.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A set of policies `Pi`.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyClass {
    Explicit(Vec<Policy>),
    /// All deterministic non-stationary policies, kept symbolic.
    AllDeterministic {
        cap: u64,
    },
}

impl PolicyClass {
    pub fn explicit(policies: Vec<Policy>) -> Result<Self> {
        if policies.is_empty() {
            return Err(LabError::InvalidArgument("explicit policy class is empty".into()));
        }
        Ok(PolicyClass::Explicit(policies))
    }

    pub fn policies(&self) -> Option<&[Policy]> {
        match self {
            PolicyClass::Explicit(p) => Some(p),
            PolicyClass::AllDeterministic { .. } => None,
        }
    }

    /// Materialise the class, enumerating the symbolic full class if its size
    /// is within the cap.
    pub fn materialize(&self, mdp: &TabularMdp) -> Result<Vec<Policy>> {
        match self {
            PolicyClass::Explicit(p) => Ok(p.clone()),
            PolicyClass::AllDeterministic { cap } => match enumerate_policies(mdp, *cap)? {
                PolicyClass::Explicit(p) => Ok(p),
                PolicyClass::AllDeterministic { .. } => unreachable!(),
            },
        }
    }
}

/// `A^(S*H)`, or `None` on overflow.
pub fn policy_count(mdp: &TabularMdp) -> Option<u128> {
    let exp = u32::try_from(mdp.n_states() * mdp.horizon()).ok()?;
    (mdp.n_actions() as u128).checked_pow(exp)
}

/// All deterministic non-stationary policies in lexicographic order of their
/// `[h][s]` action tables (index 0 plays action 0 everywhere; the last table
/// entry varies fastest).
pub fn enumerate_policies(mdp: &TabularMdp, cap: u64) -> Result<PolicyClass> {
    let (h, s, a) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let count = match policy_count(mdp) {
        Some(c) if c <= cap as u128 => c as usize,
        Some(c) => return Err(LabError::CapExceeded { count: format!("{a}^{} = {c}", s * h), cap }),
        None => return Err(LabError::CapExceeded { count: format!("{a}^{}", s * h), cap }),
    };
    let positions = h * s;
    let mut policies = Vec::with_capacity(count);
    let mut table = vec![0usize; positions];
    for _ in 0..count {
        policies.push(Policy::Deterministic { horizon: h, n_states: s, n_actions: a, actions: table.clone() });
        // odometer increment, last position fastest
        for pos in (0..positions).rev() {
            table[pos] += 1;
            if table[pos] < a {
                break;
            }
            table[pos] = 0;
        }
    }
    Ok(PolicyClass::Explicit(policies))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trivial(h: usize, s: usize, a: usize) -> TabularMdp {
        let mut p = vec![0.0; h * s * a * s];
        for chunk in p.chunks_mut(s) {
            chunk[0] = 1.0;
        }
        TabularMdp::from_flat(h, s, a, 0, p, vec![0.0; h * s * a]).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_policies(&trivial(1, 1, 2), 100).unwrap().policies().unwrap().len(), 2);
        assert_eq!(enumerate_policies(&trivial(3, 3, 2), 1000).unwrap().policies().unwrap().len(), 512);
    }

    #[test]
    fn enumeration_refuses_over_cap() {
        let err = enumerate_policies(&trivial(4, 4, 3), 1_000_000).unwrap_err();
        match err {
            LabError::CapExceeded { count, cap } => {
                assert_eq!(cap, 1_000_000);
                assert!(count.contains("3^16"), "{count}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let class = enumerate_policies(&trivial(1, 2, 2), 10).unwrap();
        let tables: Vec<Vec<usize>> =
            class.policies().unwrap().iter().map(|p| (0..2).map(|s| p.action(0, s).unwrap()).collect()).collect();
        assert_eq!(tables, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let p = Policy::greedy(1, 2, 3, &[0.5, 0.5, 0.1, 0.0, 0.2, 0.2]);
        assert_eq!(p.action(0, 0), Some(0));
        assert_eq!(p.action(0, 1), Some(1));
    }

    #[test]
    fn stochastic_rows_must_sum_to_one() {
        assert!(Policy::stochastic(1, 1, 2, vec![0.5, 0.4]).is_err());
        assert!(Policy::stochastic(1, 1, 2, vec![0.5, 0.5]).is_ok());
    }
}
