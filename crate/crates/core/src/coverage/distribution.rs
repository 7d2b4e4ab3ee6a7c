use serde::{Deserialize, Serialize};

use crate::mdp::{OccupancyMeasure, PROB_TOL};
use crate::{LabError, Result};

/// One distribution over state-action pairs per step, flat `[h][s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataDistribution {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    mu: Vec<f64>,
}

impl DataDistribution {
    pub fn from_flat(horizon: usize, n_states: usize, n_actions: usize, mu: Vec<f64>) -> Result<Self> {
        let n = n_states * n_actions;
        if mu.len() != horizon * n {
            return Err(LabError::DimensionMismatch(format!(
                "distribution has {} entries, expected {}",
                mu.len(),
                horizon * n
            )));
        }
        for (h, step) in mu.chunks(n).enumerate() {
            let total: f64 = step.iter().sum();
            if step.iter().any(|m| *m < 0.0 || !m.is_finite()) || (total - 1.0).abs() > PROB_TOL {
                return Err(LabError::Validation(format!("mu[{h}] is not a distribution (sum {total})")));
            }
        }
        Ok(DataDistribution { horizon, n_states, n_actions, mu })
    }

    /// Build from per-step `[s][a]` slices.
    pub fn from_steps(n_states: usize, n_actions: usize, steps: &[Vec<f64>]) -> Result<Self> {
        Self::from_flat(steps.len(), n_states, n_actions, steps.concat())
    }

    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let n = n_states * n_actions;
        DataDistribution { horizon, n_states, n_actions, mu: vec![1.0 / n as f64; horizon * n] }
    }

    /// `mu_h = rho_h^pi`.
    pub fn from_occupancy(occ: &OccupancyMeasure) -> Self {
        DataDistribution {
            horizon: occ.horizon(),
            n_states: occ.n_states(),
            n_actions: occ.n_actions(),
            mu: occ.as_flat().to_vec(),
        }
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

    pub fn step(&self, h: usize) -> &[f64] {
        let n = self.n_pairs();
        &self.mu[h * n..(h + 1) * n]
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.mu[(h * self.n_states + s) * self.n_actions + a]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.mu
    }

    pub fn check_dims(&self, horizon: usize, n_states: usize, n_actions: usize) -> Result<()> {
        if (self.horizon, self.n_states, self.n_actions) != (horizon, n_states, n_actions) {
            return Err(LabError::DimensionMismatch(format!(
                "distribution is (H={}, S={}, A={}) but model is (H={horizon}, S={n_states}, A={n_actions})",
                self.horizon, self.n_states, self.n_actions
            )));
        }
        Ok(())
    }
}
