use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::agents::RegretMode;
use crate::coverage::DataDistribution;
use crate::mdp::{argmax_lowest, dot, occupancy_measures, optimal_values, sample_step, LinearMdp, Policy, Transition};
use crate::rng::{seeded, LabRng};
use crate::trace::{Algorithm, Checkpoints, RegretTrace, TraceRow};
use crate::{LabError, Result};

/// Relative Frobenius error allowed between the maintained inverse and a
/// fresh factorisation.
pub const INVERSE_FIDELITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// `lambda = T^eta` for the whole run.
    #[default]
    Fixed,
    /// `lambda_t = t^eta`, with the inverse refactorised every episode.
    PerEpisode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsviConfig {
    pub episodes: usize,
    pub eta: f64,
    pub beta_scale: f64,
    pub delta: f64,
    #[serde(default)]
    pub lambda_mode: LambdaMode,
    /// Overrides the `T^eta` schedule with a constant.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Clip ceiling; defaults to 1 for normalised environments and `H`
    /// otherwise.
    #[serde(default)]
    pub v_max: Option<f64>,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub regret_mode: RegretMode,
    /// Reference distribution for the per-checkpoint `E_rho` / `E_mu`
    /// records.
    #[serde(default)]
    pub coverage_mu: Option<DataDistribution>,
    /// Compare the maintained inverse against a fresh factorisation every
    /// this many episodes (0 disables).
    #[serde(default = "default_fidelity_every")]
    pub fidelity_every: usize,
}

fn default_fidelity_every() -> usize {
    500
}

impl LsviConfig {
    pub fn new(episodes: usize) -> Self {
        LsviConfig {
            episodes,
            eta: 0.0,
            beta_scale: 1.0,
            delta: 0.05,
            lambda_mode: LambdaMode::Fixed,
            lambda: None,
            v_max: None,
            checkpoints: Checkpoints::default(),
            regret_mode: RegretMode::Exact,
            coverage_mu: None,
            fidelity_every: default_fidelity_every(),
        }
    }
}

/// `beta_scale * sqrt(lambda) * H * (d + sqrt(ln(1/delta)))`.
pub fn lsvi_beta(beta_scale: f64, lambda: f64, horizon: usize, d: usize, delta: f64) -> f64 {
    beta_scale * lambda.sqrt() * horizon as f64 * (d as f64 + (1.0 / delta).ln().sqrt())
}

#[derive(Debug, Clone)]
struct StepState {
    /// `sum phi phi^T` over past visits.
    gram: DMatrix<f64>,
    lambda_mat: DMatrix<f64>,
    inverse: DMatrix<f64>,
    /// `sum phi_i r_i`.
    reward_moment: DVector<f64>,
    /// `next[z * S + s']` visit counts.
    next: Vec<f64>,
    data: Vec<Transition>,
}

/// Quantities measured while running one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeInfo {
    pub t: usize,
    pub gap: f64,
    /// `||phi(s_h, a_h)||^2_{Lambda_h^-1}` at the visited pair, per step.
    pub phi_norm_sq: Vec<f64>,
    /// `||phi(s_h, a_h)||^2` at the visited pair, per step.
    pub phi_sq: Vec<f64>,
    /// Number of earlier visits to step `h` (so `Lambda_h = lambda I + t-1 terms`).
    pub prior_visits: Vec<usize>,
    /// `sum_h E_{rho_h}[||phi||_{Lambda_h^-1}]` under this episode's policy.
    pub expected_bonus_norm: f64,
    pub lambda: f64,
    pub beta: f64,
    pub policy: Policy,
    pub transitions: Vec<Transition>,
    /// `(E_rho, E_mu)` of `phi^T Lambda_h^-1 phi` per step, when a reference
    /// distribution is configured.
    pub coverage_terms: Option<Vec<(f64, f64)>>,
}

/// LSVI-UCB state, exposed step by step so that its internals can be
/// compared with independent solves.
#[derive(Debug, Clone)]
pub struct LsviAgent<'a> {
    mdp: &'a LinearMdp,
    cfg: LsviConfig,
    lambda: f64,
    beta: f64,
    v_max: f64,
    steps: Vec<StepState>,
    weights: Vec<DVector<f64>>,
    phi: Vec<DVector<f64>>,
    episodes_done: usize,
    v_star: f64,
    rng: LabRng,
}

impl<'a> LsviAgent<'a> {
    pub fn new(mdp: &'a LinearMdp, cfg: LsviConfig, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.eta) {
            return Err(LabError::InvalidArgument(format!("eta = {} outside [0, 1]", cfg.eta)));
        }
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(LabError::InvalidArgument(format!("delta = {} outside (0, 1)", cfg.delta)));
        }
        let d = mdp.dim();
        let lambda = match (cfg.lambda, cfg.lambda_mode) {
            (Some(l), _) => l,
            (None, LambdaMode::Fixed) => (cfg.episodes.max(1) as f64).powf(cfg.eta),
            (None, LambdaMode::PerEpisode) => 1.0,
        };
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(LabError::InvalidArgument(format!("lambda = {lambda} must be positive")));
        }
        let v_max = cfg.v_max.unwrap_or_else(|| mdp.tabular().value_ceiling());
        let (ns, na, hz) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
        let steps = (0..hz)
            .map(|_| StepState {
                gram: DMatrix::zeros(d, d),
                lambda_mat: DMatrix::identity(d, d) * lambda,
                inverse: DMatrix::identity(d, d) / lambda,
                reward_moment: DVector::zeros(d),
                next: vec![0.0; ns * na * ns],
                data: Vec::new(),
            })
            .collect();
        let phi = (0..ns * na).map(|z| DVector::from_column_slice(mdp.phi_pair(z))).collect();
        let beta = lsvi_beta(cfg.beta_scale, lambda, hz, d, cfg.delta);
        Ok(LsviAgent {
            mdp,
            cfg,
            lambda,
            beta,
            v_max,
            steps,
            weights: vec![DVector::zeros(d); hz],
            phi,
            episodes_done: 0,
            v_star: optimal_values(mdp.tabular()).v_init(mdp.tabular()),
            rng: seeded(seed),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    /// `w_h` from the most recent planning pass.
    pub fn weights(&self, h: usize) -> &[f64] {
        self.weights[h].as_slice()
    }

    pub fn inverse(&self, h: usize) -> &DMatrix<f64> {
        &self.steps[h].inverse
    }

    pub fn covariance(&self, h: usize) -> &DMatrix<f64> {
        &self.steps[h].lambda_mat
    }

    /// Step-`h` transitions collected so far.
    pub fn data(&self, h: usize) -> &[Transition] {
        &self.steps[h].data
    }

    /// `phi^T Lambda_h^-1 phi`.
    pub fn phi_norm_sq(&self, h: usize, pair: usize) -> f64 {
        let v = &self.phi[pair];
        v.dot(&(&self.steps[h].inverse * v))
    }

    fn q_row(&self, h: usize, s: usize) -> Vec<f64> {
        let na = self.mdp.n_actions();
        (0..na)
            .map(|a| {
                let z = s * na + a;
                let bonus = self.beta * self.phi_norm_sq(h, z).max(0.0).sqrt();
                (self.phi[z].dot(&self.weights[h]) + bonus).min(self.v_max)
            })
            .collect()
    }

    /// `min(<phi, w_h> + beta ||phi||_{Lambda_h^-1}, V_max)` as flat `[s][a]`.
    pub fn q_values(&self, h: usize) -> Vec<f64> {
        (0..self.mdp.n_states()).flat_map(|s| self.q_row(h, s)).collect()
    }

    /// Backward ridge-regression pass over the data gathered so far; returns
    /// the greedy policy.
    pub fn plan(&mut self) -> Result<Policy> {
        let (hz, ns, na) = (self.mdp.horizon(), self.mdp.n_states(), self.mdp.n_actions());
        let mut v_next = vec![0.0; ns];
        let mut actions = vec![0; hz * ns];
        for h in (0..hz).rev() {
            let st = &self.steps[h];
            let mut b = st.reward_moment.clone();
            for z in 0..ns * na {
                let mass = dot(&st.next[z * ns..(z + 1) * ns], &v_next);
                if mass != 0.0 {
                    b.axpy(mass, &self.phi[z], 1.0);
                }
            }
            let w = &st.inverse * b;
            if w.iter().any(|x| !x.is_finite()) {
                let eig = SymmetricEigen::new(st.lambda_mat.clone()).eigenvalues;
                let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(l, u), &e| (l.min(e), u.max(e)));
                return Err(LabError::IllConditioned { step: h, episode: self.episodes_done + 1, condition: hi / lo });
            }
            self.weights[h] = w;
            for s in 0..ns {
                let row = self.q_row(h, s);
                let a = argmax_lowest(&row);
                actions[h * ns + s] = a;
                v_next[s] = row[a];
            }
        }
        Policy::deterministic(hz, ns, na, actions)
    }

    fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        self.lambda = lambda;
        self.beta = lsvi_beta(self.cfg.beta_scale, lambda, self.mdp.horizon(), self.mdp.dim(), self.cfg.delta);
        let d = self.mdp.dim();
        for st in &mut self.steps {
            st.lambda_mat = &st.gram + DMatrix::identity(d, d) * lambda;
            st.inverse = fresh_inverse(&st.lambda_mat)?;
        }
        Ok(())
    }

    /// Plan, roll out the greedy policy once, and absorb the new data.
    pub fn step(&mut self) -> Result<EpisodeInfo> {
        let t = self.episodes_done + 1;
        if self.cfg.lambda.is_none() && self.cfg.lambda_mode == LambdaMode::PerEpisode {
            self.set_lambda((t as f64).powf(self.cfg.eta))?;
        }
        let policy = self.plan()?;
        let tab = self.mdp.tabular();
        let (hz, na) = (tab.horizon(), tab.n_actions());
        let occ = occupancy_measures(tab, &policy)?;

        let mut expected_bonus_norm = 0.0;
        let mut coverage_terms = self.cfg.coverage_mu.as_ref().map(|_| Vec::with_capacity(hz));
        for h in 0..hz {
            let norms: Vec<f64> = (0..tab.n_pairs()).map(|z| self.phi_norm_sq(h, z)).collect();
            let roots: Vec<f64> = norms.iter().map(|x| x.max(0.0).sqrt()).collect();
            expected_bonus_norm += dot(occ.step(h), &roots);
            if let (Some(terms), Some(mu)) = (coverage_terms.as_mut(), self.cfg.coverage_mu.as_ref()) {
                terms.push((dot(occ.step(h), &norms), dot(mu.step(h), &norms)));
            }
        }

        let mut s = tab.s_init();
        let mut transitions = Vec::with_capacity(hz);
        let mut phi_norm_sq = Vec::with_capacity(hz);
        let mut phi_sq = Vec::with_capacity(hz);
        let mut prior_visits = Vec::with_capacity(hz);
        for h in 0..hz {
            let a = policy.action(h, s).expect("planned policy is deterministic");
            let z = s * na + a;
            phi_norm_sq.push(self.phi_norm_sq(h, z));
            phi_sq.push(self.phi[z].norm_squared());
            prior_visits.push(self.steps[h].data.len());
            let (r, s_next) = sample_step(tab, h, s, a, &mut self.rng);
            transitions.push(Transition { h, s, a, r, s_next });
            s = s_next;
        }

        let v_star = self.v_star;
        let gap = match self.cfg.regret_mode {
            RegretMode::Exact => {
                let v: f64 = (0..hz).map(|h| dot(occ.step(h), tab.rewards_at(h))).sum();
                (v_star - v).max(0.0)
            }
            RegretMode::Sampled => v_star - transitions.iter().map(|tr| tr.r).sum::<f64>(),
        };

        let ns = tab.n_states();
        for tr in &transitions {
            let z = tr.s * na + tr.a;
            let phi = self.phi[z].clone();
            let st = &mut self.steps[tr.h];
            st.gram.ger(1.0, &phi, &phi, 1.0);
            st.lambda_mat.ger(1.0, &phi, &phi, 1.0);
            // Sherman-Morrison
            let u = &st.inverse * &phi;
            let denom = 1.0 + phi.dot(&u);
            st.inverse.ger(-1.0 / denom, &u, &u, 1.0);
            st.reward_moment.axpy(tr.r, &phi, 1.0);
            st.next[z * ns + tr.s_next] += 1.0;
            st.data.push(*tr);
        }
        self.episodes_done = t;

        Ok(EpisodeInfo {
            t,
            gap,
            phi_norm_sq,
            phi_sq,
            prior_visits,
            expected_bonus_norm,
            lambda: self.lambda,
            beta: self.beta,
            policy,
            transitions,
            coverage_terms,
        })
    }

    /// Largest relative Frobenius error between maintained inverses and
    /// fresh factorisations.
    pub fn inverse_fidelity(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for st in &self.steps {
            let fresh = fresh_inverse(&st.lambda_mat)?;
            worst = worst.max((&st.inverse - &fresh).norm() / fresh.norm());
        }
        Ok(worst)
    }

    /// Largest entrywise gap between the maintained `Lambda_h` and
    /// `lambda I + sum phi phi^T` rebuilt from the stored data.
    pub fn covariance_rebuild_error(&self) -> f64 {
        let d = self.mdp.dim();
        let na = self.mdp.n_actions();
        self.steps
            .iter()
            .map(|st| {
                let mut m = DMatrix::identity(d, d) * self.lambda;
                for tr in &st.data {
                    let v = &self.phi[tr.s * na + tr.a];
                    m.ger(1.0, v, v, 1.0);
                }
                (&m - &st.lambda_mat).amax()
            })
            .fold(0.0, f64::max)
    }
}

fn fresh_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse()).ok_or(LabError::IllConditioned {
        step: 0,
        episode: 0,
        condition: f64::INFINITY,
    })
}

/// Per-checkpoint, per-step expectations of `phi^T Lambda^-1 phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub t: usize,
    pub h: usize,
    pub lambda: f64,
    pub e_rho: f64,
    pub e_mu: f64,
}

/// Extremes of the feature-norm sandwich over every visited pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichSummary {
    /// `min (||phi||^2_{Lambda^-1} - ||phi||^2 / (lambda + t - 1))`.
    pub lower_margin: f64,
    /// `min (1/lambda - ||phi||^2_{Lambda^-1})`.
    pub upper_margin: f64,
    pub observations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsviRun {
    pub trace: RegretTrace,
    pub dim: usize,
    pub lambda: f64,
    pub beta: f64,
    pub v_max: f64,
    pub sandwich: SandwichSummary,
    pub coverage: Vec<CoverageRecord>,
    /// Visited pair per step and episode, `[h][t]`.
    pub visited: Vec<Vec<usize>>,
    /// Worst relative inverse error seen at the periodic checks.
    pub inverse_fidelity: f64,
}

/// LSVI-UCB with `lambda = T^eta` (or the per-episode schedule) and bonus
/// `beta ||phi||_{Lambda^-1}`.
pub fn run_lsvi(mdp: &LinearMdp, cfg: &LsviConfig, seed: u64) -> Result<LsviRun> {
    let mut agent = LsviAgent::new(mdp, cfg.clone(), seed)?;
    let checkpoints = cfg.checkpoints.schedule(cfg.episodes);
    let mut next_cp = checkpoints.iter().peekable();
    let hz = mdp.horizon();
    let na = mdp.n_actions();
    let mut trace = RegretTrace::new(Algorithm::Lsvi, seed);
    let mut sandwich = SandwichSummary { lower_margin: f64::INFINITY, upper_margin: f64::INFINITY, observations: 0 };
    let mut coverage = Vec::new();
    let mut visited = vec![Vec::with_capacity(cfg.episodes); hz];
    let mut cum_regret = 0.0;
    let mut bonus_sum = 0.0;
    let mut e3_sum = 0.0;
    let mut fidelity = 0.0_f64;

    for t in 1..=cfg.episodes {
        let info = agent.step()?;
        cum_regret += info.gap;
        e3_sum += 2.0 * info.beta * info.expected_bonus_norm;
        for h in 0..hz {
            let x = info.phi_norm_sq[h];
            bonus_sum += x.max(0.0).sqrt();
            let lower = info.phi_sq[h] / (info.lambda + info.prior_visits[h] as f64);
            sandwich.lower_margin = sandwich.lower_margin.min(x - lower);
            sandwich.upper_margin = sandwich.upper_margin.min(1.0 / info.lambda - x);
            sandwich.observations += 1;
            let tr = info.transitions[h];
            visited[h].push(tr.s * na + tr.a);
        }
        if cfg.fidelity_every > 0 && t % cfg.fidelity_every == 0 {
            let err = agent.inverse_fidelity()?;
            fidelity = fidelity.max(err);
            if err > INVERSE_FIDELITY_TOL {
                trace.events.push(format!("episode {t}: maintained inverse off by {err:e} (relative)"));
            }
        }
        if next_cp.peek() == Some(&&t) {
            next_cp.next();
            let (lo, hi) =
                info.phi_norm_sq.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &x| (l.min(x), u.max(x)));
            trace.rows.push(TraceRow {
                t,
                cum_regret,
                per_episode_gap: info.gap,
                bonus_sum: Some(bonus_sum),
                optimism_bound: Some(e3_sum),
                min_phi_norm_sq: Some(lo),
                max_phi_norm_sq: Some(hi),
                lambda: Some(info.lambda),
                ..Default::default()
            });
            if let Some(terms) = &info.coverage_terms {
                for (h, &(e_rho, e_mu)) in terms.iter().enumerate() {
                    coverage.push(CoverageRecord { t, h, lambda: info.lambda, e_rho, e_mu });
                }
            }
        }
    }
    trace.episodes = cfg.episodes;
    trace.meta.insert("lambda".into(), agent.lambda());
    trace.meta.insert("beta".into(), agent.beta());
    trace.meta.insert("v_max".into(), agent.v_max());
    trace.meta.insert("d".into(), mdp.dim() as f64);
    trace.meta.insert("inverse_fidelity".into(), fidelity);
    Ok(LsviRun {
        trace,
        dim: mdp.dim(),
        lambda: agent.lambda(),
        beta: agent.beta(),
        v_max: agent.v_max(),
        sandwich,
        coverage,
        visited,
        inverse_fidelity: fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsvi::{make_random_linear_mdp, FeatureStructure};
    use crate::mdp::TabularMdp;

    #[test]
    fn single_action_has_no_regret() {
        let p = vec![vec![vec![0.5, 0.5]], vec![vec![0.2, 0.8]]];
        let r = vec![vec![0.3], vec![0.1]];
        let tab = TabularMdp::new(0, vec![p.clone(), p], vec![r.clone(), r]).unwrap();
        let lin = LinearMdp::one_hot(&tab).unwrap();
        let mut cfg = LsviConfig::new(30);
        cfg.beta_scale = 5.0;
        let run = run_lsvi(&lin, &cfg, 1).unwrap();
        assert_eq!(run.trace.final_regret(), 0.0);
    }

    #[test]
    fn first_bonus_equals_inverse_lambda_for_unit_features() {
        let m = make_random_linear_mdp(4, 3, 2, 2, FeatureStructure::LowVariance, 2).unwrap();
        let mut cfg = LsviConfig::new(10);
        cfg.lambda = Some(1.0);
        let mut agent = LsviAgent::new(&m, cfg, 1).unwrap();
        let info = agent.step().unwrap();
        for x in info.phi_norm_sq {
            assert!((x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn maintained_state_matches_rebuild() {
        let m = make_random_linear_mdp(3, 4, 2, 3, FeatureStructure::Generic, 5).unwrap();
        let mut cfg = LsviConfig::new(200);
        cfg.eta = 0.5;
        let mut agent = LsviAgent::new(&m, cfg, 3).unwrap();
        for _ in 0..200 {
            agent.step().unwrap();
        }
        assert!(agent.covariance_rebuild_error() < 1e-9);
        assert!(agent.inverse_fidelity().unwrap() < INVERSE_FIDELITY_TOL);
    }

    #[test]
    fn zero_lambda_is_rejected() {
        let m = make_random_linear_mdp(3, 4, 2, 3, FeatureStructure::Generic, 5).unwrap();
        let mut cfg = LsviConfig::new(5);
        cfg.lambda = Some(0.0);
        assert!(LsviAgent::new(&m, cfg, 1).is_err());
    }
}
