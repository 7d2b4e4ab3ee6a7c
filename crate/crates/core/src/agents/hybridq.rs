use serde::{Deserialize, Serialize};

use super::golf::RegretMode;
use super::loss::state_max;
use super::{FunctionClass, OfflineDataset};
use crate::coverage::DataDistribution;
use crate::mdp::{
    bellman_apply, dot, occupancy_measures, optimal_values, sample_episode, Policy, TabularMdp, Transition,
};
use crate::rng::seeded;
use crate::trace::{Algorithm, Checkpoints, RegretTrace, TraceRow};
use crate::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub episodes: usize,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub regret_mode: RegretMode,
}

impl HybridConfig {
    pub fn new(episodes: usize) -> Self {
        HybridConfig { episodes, checkpoints: Checkpoints::default(), regret_mode: RegretMode::Exact }
    }
}

/// Per-step sufficient statistics of a pooled dataset: the squared loss of
/// any `g` against targets `r + max f_{h+1}(s')` depends on the data only
/// through visit counts, reward sums and next-state counts.
#[derive(Debug, Clone)]
struct StepStats {
    visits: Vec<f64>,
    reward_sum: Vec<f64>,
    /// `next[z * S + s']`.
    next: Vec<f64>,
}

impl StepStats {
    fn new(n_pairs: usize, n_states: usize) -> Self {
        StepStats { visits: vec![0.0; n_pairs], reward_sum: vec![0.0; n_pairs], next: vec![0.0; n_pairs * n_states] }
    }

    fn push(&mut self, tr: &Transition, n_states: usize, n_actions: usize) {
        let z = tr.s * n_actions + tr.a;
        self.visits[z] += 1.0;
        self.reward_sum[z] += tr.r;
        self.next[z * n_states + tr.s_next] += 1.0;
    }
}

/// Fitted Q-iteration over the pooled data: for `h = H-1, ..., 0`, pick
/// `argmin_{g in F_h} sum (g(s,a) - r - max_a' f_{h+1}(s',a'))^2` (lowest
/// index on ties). Returns the chosen index per step.
fn fqi(class: &FunctionClass, stats: &[StepStats]) -> Vec<usize> {
    let hz = class.horizon();
    let (ns, na) = (class.n_states(), class.n_actions());
    let mut chosen = vec![0; hz];
    let mut v_next = vec![0.0; ns];
    for h in (0..hz).rev() {
        let st = &stats[h];
        // y[z] = sum of targets at z
        let y: Vec<f64> =
            (0..ns * na).map(|z| st.reward_sum[z] + dot(&st.next[z * ns..(z + 1) * ns], &v_next)).collect();
        let mut best = (0, f64::INFINITY);
        for i in 0..class.step_len(h) {
            let g = class.get(h, i);
            let loss: f64 = (0..ns * na).map(|z| st.visits[z] * g[z] * g[z] - 2.0 * g[z] * y[z]).sum();
            if loss < best.1 {
                best = (i, loss);
            }
        }
        chosen[h] = best.0;
        let g = class.get(h, best.0);
        v_next = (0..ns).map(|s| state_max(g, s, na)).collect();
    }
    chosen
}

/// `max_h E_{nu_h}[(f_h - T_h f_{h+1})^2]` for an index tuple.
pub fn offline_bellman_error(mdp: &TabularMdp, class: &FunctionClass, tuple: &[usize], nu: &DataDistribution) -> f64 {
    let hz = mdp.horizon();
    (0..hz)
        .map(|h| {
            let target = if h + 1 == hz {
                mdp.rewards_at(h).to_vec()
            } else {
                bellman_apply(mdp, class.get(h + 1, tuple[h + 1]), h)
            };
            let sq: Vec<f64> = class.get(h, tuple[h]).iter().zip(&target).map(|(f, t)| (f - t) * (f - t)).collect();
            dot(nu.step(h), &sq)
        })
        .fold(0.0, f64::max)
}

/// `(max mu/nu, max mu/nu^2)` over pairs where `mu > 0`; infinite when `nu`
/// misses part of `mu`'s support.
pub fn hybrid_coverage_ratios(mu: &DataDistribution, nu: &DataDistribution) -> (f64, f64) {
    let mut r1 = 0.0_f64;
    let mut r2 = 0.0_f64;
    for (m, n) in mu.as_flat().iter().zip(nu.as_flat()) {
        if *m <= 0.0 {
            continue;
        }
        if *n <= 0.0 {
            return (f64::INFINITY, f64::INFINITY);
        }
        r1 = r1.max(m / n);
        r2 = r2.max(m / (n * n));
    }
    (r1, r2)
}

/// Hybrid-Q: greedy rollouts of the current iterate (starting from the zero
/// function), then fitted Q-iteration on offline plus online data.
pub fn run_hybridq(
    mdp: &TabularMdp,
    class: &FunctionClass,
    offline: &OfflineDataset,
    cfg: &HybridConfig,
    seed: u64,
) -> Result<RegretTrace> {
    class.check_dims(mdp)?;
    if offline.per_step.len() != mdp.horizon() {
        return Err(LabError::DimensionMismatch(format!(
            "offline dataset has {} steps, MDP horizon is {}",
            offline.per_step.len(),
            mdp.horizon()
        )));
    }
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let v_star = optimal_values(mdp).v_init(mdp);
    let mut stats: Vec<StepStats> = (0..hz).map(|_| StepStats::new(ns * na, ns)).collect();
    for (h, data) in offline.per_step.iter().enumerate() {
        for tr in data {
            stats[h].push(tr, ns, na);
        }
    }
    let checkpoints = cfg.checkpoints.schedule(cfg.episodes);
    let mut next_cp = checkpoints.iter().peekable();
    let mut rng = seeded(seed);
    let mut trace = RegretTrace::new(Algorithm::Hybridq, seed);
    trace.meta.insert("n_off".into(), offline.n_off as f64);
    trace.meta.insert("v_star".into(), v_star);

    // f^1 = 0, whose greedy policy plays action 0 everywhere
    let mut policy = Policy::constant(hz, ns, na, 0)?;
    let mut cum_regret = 0.0;
    for t in 1..=cfg.episodes {
        let episode = sample_episode(mdp, &policy, &mut rng);
        let gap = match cfg.regret_mode {
            RegretMode::Exact => {
                let occ = occupancy_measures(mdp, &policy)?;
                let v: f64 = (0..hz).map(|h| dot(occ.step(h), mdp.rewards_at(h))).sum();
                (v_star - v).max(0.0)
            }
            RegretMode::Sampled => v_star - episode.iter().map(|tr| tr.r).sum::<f64>(),
        };
        cum_regret += gap;
        for tr in &episode {
            stats[tr.h].push(tr, ns, na);
        }
        let tuple = fqi(class, &stats);
        policy = super::golf::tuple_policy(class, &tuple);
        if next_cp.peek() == Some(&&t) {
            next_cp.next();
            trace.rows.push(TraceRow {
                t,
                cum_regret,
                per_episode_gap: gap,
                max_offline_bellman_sq: Some(offline_bellman_error(mdp, class, &tuple, &offline.nu)),
                ..Default::default()
            });
        }
    }
    trace.episodes = cfg.episodes;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{make_offline_dataset, squared_bellman_loss, Behavior};

    fn mdp() -> TabularMdp {
        let step = vec![vec![vec![0.5, 0.5], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![0.3, 0.7]]];
        let r = vec![vec![0.1, 0.3], vec![0.2, 0.05]];
        TabularMdp::new(0, vec![step.clone(), step], vec![r.clone(), r]).unwrap()
    }

    #[test]
    fn no_episodes_no_regret() {
        let m = mdp();
        let class = FunctionClass::singleton(&m, &optimal_values(&m).q).unwrap();
        let nu = DataDistribution::uniform(2, 2, 2);
        let off = make_offline_dataset(&m, Behavior::Distribution(&nu), 10, 1).unwrap();
        let tr = run_hybridq(&m, &class, &off, &HybridConfig::new(0), 1).unwrap();
        assert_eq!(tr.final_regret(), 0.0);
    }

    #[test]
    fn fqi_matches_direct_loss_minimisation() {
        let m = mdp();
        let per_step = vec![
            vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.5, 0.0, 0.2, 0.9], vec![0.3, 0.3, 0.3, 0.3]],
            vec![vec![0.1, 0.3, 0.2, 0.05], vec![0.2, 0.2, 0.2, 0.2]],
        ];
        let class = FunctionClass::product(2, 2, 1.0, per_step).unwrap();
        let nu = DataDistribution::uniform(2, 2, 2);
        let off = make_offline_dataset(&m, Behavior::Distribution(&nu), 40, 3).unwrap();
        let mut stats: Vec<StepStats> = (0..2).map(|_| StepStats::new(4, 2)).collect();
        for (h, d) in off.per_step.iter().enumerate() {
            d.iter().for_each(|tr| stats[h].push(tr, 2, 2));
        }
        let chosen = fqi(&class, &stats);
        let argmin = |losses: Vec<f64>| {
            losses.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &l)| if l < b.1 { (i, l) } else { b }).0
        };
        let j = argmin((0..2).map(|j| squared_bellman_loss(class.get(1, j), None, 2, &off.per_step[1])).collect());
        let i = argmin(
            (0..3).map(|i| squared_bellman_loss(class.get(0, i), Some(class.get(1, j)), 2, &off.per_step[0])).collect(),
        );
        assert_eq!(chosen, vec![i, j]);
    }

    #[test]
    fn qstar_only_class_has_no_regret_after_the_first_episode() {
        let m = mdp();
        let class = FunctionClass::singleton(&m, &optimal_values(&m).q).unwrap();
        let nu = DataDistribution::uniform(2, 2, 2);
        let off = make_offline_dataset(&m, Behavior::Distribution(&nu), 10, 1).unwrap();
        let mut cfg = HybridConfig::new(30);
        cfg.checkpoints = Checkpoints::Every;
        let tr = run_hybridq(&m, &class, &off, &cfg, 2).unwrap();
        // episode 1 plays the zero function's greedy policy
        assert!(tr.rows[1..].iter().all(|r| r.per_episode_gap == 0.0));
        assert_eq!(tr.rows.last().unwrap().max_offline_bellman_sq, Some(0.0));
    }
}
