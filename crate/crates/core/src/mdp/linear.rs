use super::{TabularMdp, LINEAR_PROB_TOL, PROB_TOL};
use crate::{LabError, Result};

/// Linear MDP: `P_h(s'|s,a) = <phi(s,a), psi_h(s')>`, `r_h(s,a) = <phi(s,a), theta_h>`.
///
/// The induced tabular model is built and validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMdp {
    dim: usize,
    // [s][a][d]
    phi: Vec<f64>,
    // [h][s'][d]
    psi: Vec<f64>,
    // [h][d]
    theta: Vec<f64>,
    tabular: TabularMdp,
}

impl LinearMdp {
    #[allow(clippy::too_many_arguments)]
    pub fn from_flat(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        s_init: usize,
        dim: usize,
        phi: Vec<f64>,
        psi: Vec<f64>,
        theta: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Validation("feature dimension d must be positive".into()));
        }
        if phi.len() != n_states * n_actions * dim
            || psi.len() != horizon * n_states * dim
            || theta.len() != horizon * dim
        {
            return Err(LabError::Validation(format!(
                "feature tensors have sizes phi={}, psi={}, theta={} for H={horizon}, S={n_states}, A={n_actions}, d={dim}",
                phi.len(),
                psi.len(),
                theta.len()
            )));
        }
        for (idx, f) in phi.chunks(dim).enumerate() {
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > 1.0 + PROB_TOL {
                return Err(LabError::Validation(format!(
                    "||phi[{}][{}]|| = {norm} exceeds 1",
                    idx / n_actions,
                    idx % n_actions
                )));
            }
        }
        let pairs = n_states * n_actions;
        let mut p = Vec::with_capacity(horizon * pairs * n_states);
        let mut r = Vec::with_capacity(horizon * pairs);
        for h in 0..horizon {
            let theta_h = &theta[h * dim..(h + 1) * dim];
            for idx in 0..pairs {
                let (s, a) = (idx / n_actions, idx % n_actions);
                let f = &phi[idx * dim..(idx + 1) * dim];
                let mut row: Vec<f64> = (0..n_states)
                    .map(|sn| dot(f, &psi[(h * n_states + sn) * dim..(h * n_states + sn + 1) * dim]))
                    .collect();
                if let Some(bad) = row.iter().position(|x| !(-PROB_TOL..=1.0 + PROB_TOL).contains(x)) {
                    return Err(LabError::Validation(format!(
                        "induced P[{h}][{s}][{a}][{bad}] = {} is not a probability",
                        row[bad]
                    )));
                }
                for x in row.iter_mut() {
                    *x = x.clamp(0.0, 1.0);
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > LINEAR_PROB_TOL {
                    return Err(LabError::Validation(format!("induced P[{h}][{s}][{a}] sums to {total}, expected 1")));
                }
                row.iter_mut().for_each(|x| *x /= total);
                p.extend(row);
                let rew = dot(f, theta_h);
                if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&rew) {
                    return Err(LabError::Validation(format!("induced r[{h}][{s}][{a}] = {rew} outside [0, 1]")));
                }
                r.push(rew.clamp(0.0, 1.0));
            }
        }
        let tabular = TabularMdp::from_flat(horizon, n_states, n_actions, s_init, p, r)?;
        Ok(LinearMdp { dim, phi, psi, theta, tabular })
    }

    /// Build from nested `phi[s][a][k]`, `psi[h][s'][k]`, `theta[h][k]`.
    pub fn new(s_init: usize, phi: Vec<Vec<Vec<f64>>>, psi: Vec<Vec<Vec<f64>>>, theta: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = psi.len();
        let n_states = phi.len();
        let n_actions = phi.first().map_or(0, |row| row.len());
        let dim = theta.first().map_or(0, |t| t.len());
        if horizon == 0 || n_states == 0 || n_actions == 0 {
            return Err(LabError::Validation("empty linear MDP".into()));
        }
        let flat_phi: Vec<f64> = phi.into_iter().flatten().flatten().collect();
        let flat_psi: Vec<f64> = psi.into_iter().flatten().flatten().collect();
        let flat_theta: Vec<f64> = theta.into_iter().flatten().collect();
        Self::from_flat(horizon, n_states, n_actions, s_init, dim, flat_phi, flat_psi, flat_theta)
    }

    /// One-hot features of dimension `S * A` that reproduce `mdp` exactly.
    pub fn one_hot(mdp: &TabularMdp) -> Result<Self> {
        let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
        let d = ns * na;
        let mut phi = vec![0.0; d * d];
        for k in 0..d {
            phi[k * d + k] = 1.0;
        }
        let mut psi = vec![0.0; hz * ns * d];
        let mut theta = vec![0.0; hz * d];
        for h in 0..hz {
            for k in 0..d {
                let (s, a) = (k / na, k % na);
                for (sn, p) in mdp.next_dist(h, s, a).iter().enumerate() {
                    psi[(h * ns + sn) * d + k] = *p;
                }
                theta[h * d + k] = mdp.reward(h, s, a);
            }
        }
        Self::from_flat(hz, ns, na, mdp.s_init(), d, phi, psi, theta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.tabular.horizon()
    }

    pub fn n_states(&self) -> usize {
        self.tabular.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.tabular.n_actions()
    }

    pub fn s_init(&self) -> usize {
        self.tabular.s_init()
    }

    #[inline]
    pub fn phi(&self, s: usize, a: usize) -> &[f64] {
        let idx = s * self.n_actions() + a;
        &self.phi[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Feature of the flat pair index `s * A + a`.
    #[inline]
    pub fn phi_pair(&self, pair: usize) -> &[f64] {
        &self.phi[pair * self.dim..(pair + 1) * self.dim]
    }

    pub fn psi(&self, h: usize, s_next: usize) -> &[f64] {
        let idx = h * self.n_states() + s_next;
        &self.psi[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn theta(&self, h: usize) -> &[f64] {
        &self.theta[h * self.dim..(h + 1) * self.dim]
    }

    pub fn phi_flat(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi_flat(&self) -> &[f64] {
        &self.psi
    }

    pub fn theta_flat(&self) -> &[f64] {
        &self.theta
    }

    /// The induced tabular model.
    pub fn tabular(&self) -> &TabularMdp {
        &self.tabular
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
