use serde::{Deserialize, Serialize};

use super::loss::{state_max, LossCache};
use super::FunctionClass;
use crate::mdp::{
    bellman_apply, dot, occupancy_measures, optimal_values, sample_episode, OccupancyMeasure, Policy, TabularMdp,
};
use crate::rng::seeded;
use crate::trace::{Algorithm, Checkpoints, RegretTrace, TraceRow};
use crate::{LabError, Result};

/// How the per-episode gap is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegretMode {
    /// `V*_0(s_init) - V^{pi_t}_0(s_init)` by dynamic programming.
    #[default]
    Exact,
    /// `V*_0(s_init)` minus the realised return of the episode.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GolfConfig {
    pub beta: f64,
    pub episodes: usize,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub regret_mode: RegretMode,
    /// Keep every episode's occupancy measure in the result.
    #[serde(default)]
    pub keep_occupancies: bool,
}

impl GolfConfig {
    pub fn new(beta: f64, episodes: usize) -> Self {
        GolfConfig {
            beta,
            episodes,
            checkpoints: Checkpoints::default(),
            regret_mode: RegretMode::Exact,
            keep_occupancies: false,
        }
    }
}

/// Confidence radius `scale * ln(|F| T H / delta)`.
pub fn golf_beta(class_size: f64, episodes: usize, horizon: usize, delta: f64, scale: f64) -> f64 {
    scale * (class_size * episodes.max(1) as f64 * horizon as f64 / delta).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GolfRun {
    pub trace: RegretTrace,
    /// `Q*` (when in the class) survived every update.
    pub qstar_always_in_set: Option<bool>,
    /// First episode whose confidence set excluded `Q*`.
    pub qstar_lost_at: Option<usize>,
    /// Episodes that found the confidence set empty and fell back to the
    /// full class.
    pub empty_set_episodes: Vec<usize>,
    /// `max_t max_{f in F^(t-1), h} sum_{i<t} E_{rho^(i)}[delta_h(f)^2] / beta`.
    pub kappa: f64,
    /// Selected index tuple per episode.
    pub selections: Vec<Vec<usize>>,
    pub occupancies: Option<Vec<OccupancyMeasure>>,
}

/// Confidence set over index tuples, recomputed from the loss cache.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    /// `admissible[h][i * width_h + j]`.
    pub admissible: Vec<Vec<bool>>,
    widths: Vec<usize>,
    /// `suffix[h][i]`: a surviving chain continues from `F_h[i]` to the end.
    suffix: Vec<Vec<bool>>,
    /// `prefix[h][i]`: a surviving chain reaches `F_h[i]` from step 0.
    prefix: Vec<Vec<bool>>,
    /// Number of surviving members.
    pub size: f64,
    /// Member tuples, explicit classes only.
    pub members: Option<Vec<Vec<usize>>>,
}

impl ConfidenceSet {
    pub fn compute(class: &FunctionClass, cache: &LossCache, beta: f64) -> Self {
        let hz = class.horizon();
        let admissible: Vec<Vec<bool>> = (0..hz).map(|h| cache.admissible(h, beta)).collect();
        let widths: Vec<usize> = (0..hz).map(|h| cache.width(h)).collect();
        Self::from_admissible(class, admissible, widths)
    }

    /// Every member of the class survives.
    pub fn full(class: &FunctionClass, cache: &LossCache) -> Self {
        let hz = class.horizon();
        let widths: Vec<usize> = (0..hz).map(|h| cache.width(h)).collect();
        let admissible = (0..hz).map(|h| vec![true; class.step_len(h) * widths[h]]).collect();
        Self::from_admissible(class, admissible, widths)
    }

    fn from_admissible(class: &FunctionClass, admissible: Vec<Vec<bool>>, widths: Vec<usize>) -> Self {
        let hz = class.horizon();
        if let Some(tuples) = class.tuples() {
            let members: Vec<Vec<usize>> = tuples
                .iter()
                .filter(|t| {
                    (0..hz).all(|h| {
                        let j = if h + 1 == hz { 0 } else { t[h + 1] };
                        admissible[h][t[h] * widths[h] + j]
                    })
                })
                .cloned()
                .collect();
            let mut suffix: Vec<Vec<bool>> = (0..hz).map(|h| vec![false; class.step_len(h)]).collect();
            let mut prefix = suffix.clone();
            for t in &members {
                for h in 0..hz {
                    suffix[h][t[h]] = true;
                    prefix[h][t[h]] = true;
                }
            }
            return ConfidenceSet {
                size: members.len() as f64,
                admissible,
                widths,
                suffix,
                prefix,
                members: Some(members),
            };
        }

        let mut suffix: Vec<Vec<bool>> = vec![Vec::new(); hz];
        let mut counts: Vec<Vec<f64>> = vec![Vec::new(); hz];
        for h in (0..hz).rev() {
            let w = widths[h];
            let n = class.step_len(h);
            let mut ok = vec![false; n];
            let mut cnt = vec![0.0; n];
            for i in 0..n {
                let row = &admissible[h][i * w..(i + 1) * w];
                if h + 1 == hz {
                    ok[i] = row[0];
                    cnt[i] = if row[0] { 1.0 } else { 0.0 };
                } else {
                    for (j, &a) in row.iter().enumerate() {
                        if a && suffix[h + 1][j] {
                            ok[i] = true;
                            cnt[i] += counts[h + 1][j];
                        }
                    }
                }
            }
            suffix[h] = ok;
            counts[h] = cnt;
        }
        let mut prefix: Vec<Vec<bool>> = vec![Vec::new(); hz];
        prefix[0] = suffix[0].clone();
        for h in 1..hz {
            let w = widths[h - 1];
            let mut reach = vec![false; class.step_len(h)];
            for (i, _) in prefix[h - 1].iter().enumerate().filter(|(_, &p)| p) {
                for (j, r) in reach.iter_mut().enumerate() {
                    if admissible[h - 1][i * w + j] && suffix[h][j] {
                        *r = true;
                    }
                }
            }
            prefix[h] = reach;
        }
        let size = counts[0].iter().sum();
        ConfidenceSet { admissible, widths, suffix, prefix, size, members: None }
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0.0
    }

    pub fn contains(&self, tuple: &[usize]) -> bool {
        let hz = tuple.len();
        (0..hz).all(|h| {
            let j = if h + 1 == hz { 0 } else { tuple[h + 1] };
            self.admissible[h][tuple[h] * self.widths[h] + j]
        }) && self.members.as_ref().is_none_or(|m| m.iter().any(|t| t == tuple))
    }

    /// `(F_h[i], F_{h+1}[j])` occurs in some surviving member.
    pub fn pair_survives(&self, h: usize, i: usize, j: Option<usize>) -> bool {
        let last = h + 1 == self.widths.len();
        let jj = j.unwrap_or(0);
        self.prefix[h][i] && self.admissible[h][i * self.widths[h] + jj] && (last || self.suffix[h + 1][jj])
    }

    /// Optimistic member: maximises `max_a f_0(s_init, a)`, ties broken
    /// towards the lexicographically smallest index tuple.
    pub fn optimistic(&self, class: &FunctionClass, s_init: usize) -> Option<Vec<usize>> {
        let na = class.n_actions();
        let score = |i: usize| state_max(class.get(0, i), s_init, na);
        if let Some(members) = &self.members {
            let mut best: Option<&Vec<usize>> = None;
            for t in members {
                best = match best {
                    None => Some(t),
                    Some(b) => {
                        let (sb, st) = (score(b[0]), score(t[0]));
                        if st > sb || (st == sb && t < b) {
                            Some(t)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            return best.cloned();
        }
        let hz = self.widths.len();
        let mut first = None;
        for i in (0..class.step_len(0)).filter(|&i| self.suffix[0][i]) {
            if first.is_none_or(|b| score(i) > score(b)) {
                first = Some(i);
            }
        }
        let mut tuple = vec![first?];
        for h in 0..hz - 1 {
            let i = tuple[h];
            let w = self.widths[h];
            let j = (0..w).find(|&j| self.admissible[h][i * w + j] && self.suffix[h + 1][j])?;
            tuple.push(j);
        }
        Some(tuple)
    }
}

/// Index tuple of `Q*` in the class, if every step contains it.
pub(crate) fn qstar_tuple(class: &FunctionClass, mdp: &TabularMdp, tol: f64) -> Option<Vec<usize>> {
    let opt = optimal_values(mdp);
    let n = mdp.n_pairs();
    (0..class.horizon()).map(|h| class.find(h, opt.q_step(h, n), tol)).collect()
}

/// Greedy policy of an index tuple.
pub(crate) fn tuple_policy(class: &FunctionClass, tuple: &[usize]) -> Policy {
    let f = class.function(tuple);
    Policy::greedy(class.horizon(), class.n_states(), class.n_actions(), &f.q)
}

/// `delta_h(f)^2 = (f_h - T_h f_{h+1})^2` for every surviving-able pair.
fn squared_residuals(mdp: &TabularMdp, class: &FunctionClass) -> Vec<Vec<Vec<f64>>> {
    (0..class.horizon())
        .map(|h| {
            let last = h + 1 == class.horizon();
            let w = if last { 1 } else { class.step_len(h + 1) };
            let images: Vec<Vec<f64>> = (0..w)
                .map(|j| if last { mdp.rewards_at(h).to_vec() } else { bellman_apply(mdp, class.get(h + 1, j), h) })
                .collect();
            let mut out = Vec::with_capacity(class.step_len(h) * w);
            for i in 0..class.step_len(h) {
                for img in &images {
                    out.push(class.get(h, i).iter().zip(img).map(|(f, t)| (f - t) * (f - t)).collect());
                }
            }
            out
        })
        .collect()
}

/// GOLF: optimistic selection from a least-squares confidence set.
///
/// Regret is measured exactly against `V*` unless `regret_mode` asks for
/// sampled returns. An empty confidence set is recorded and the episode's
/// selection falls back to the full class.
pub fn run_golf(mdp: &TabularMdp, class: &FunctionClass, cfg: &GolfConfig, seed: u64) -> Result<GolfRun> {
    class.check_dims(mdp)?;
    if !(cfg.beta >= 0.0) {
        return Err(LabError::InvalidArgument(format!("beta = {} must be >= 0", cfg.beta)));
    }
    let hz = mdp.horizon();
    let v_star = optimal_values(mdp).v_init(mdp);
    let qstar = qstar_tuple(class, mdp, 1e-9);
    let residuals = squared_residuals(mdp, class);
    let checkpoints = cfg.checkpoints.schedule(cfg.episodes);
    let mut next_cp = checkpoints.iter().peekable();

    let mut rng = seeded(seed);
    let mut cache = LossCache::new(class);
    let mut cum_occ: Vec<Vec<f64>> = vec![vec![0.0; mdp.n_pairs()]; hz];
    let mut trace = RegretTrace::new(Algorithm::Golf, seed);
    trace.meta.insert("beta".into(), cfg.beta);
    trace.meta.insert("class_size".into(), class.size());
    let mut run = GolfRun {
        trace: RegretTrace::new(Algorithm::Golf, seed),
        qstar_always_in_set: qstar.as_ref().map(|_| true),
        qstar_lost_at: None,
        empty_set_episodes: Vec::new(),
        kappa: 0.0,
        selections: Vec::with_capacity(cfg.episodes),
        occupancies: cfg.keep_occupancies.then(Vec::new),
    };
    let mut cum_regret = 0.0;

    for t in 1..=cfg.episodes {
        let mut set = ConfidenceSet::compute(class, &cache, cfg.beta);
        if set.is_empty() {
            run.empty_set_episodes.push(t);
            trace.events.push(format!("episode {t}: empty confidence set, using the full class"));
            set = ConfidenceSet::full(class, &cache);
        }
        let qstar_in = qstar.as_ref().map(|q| set.contains(q));
        if qstar_in == Some(false) && run.qstar_lost_at.is_none() {
            run.qstar_lost_at = Some(t);
            run.qstar_always_in_set = Some(false);
        }

        if cfg.beta > 0.0 && t > 1 {
            let mut worst = 0.0_f64;
            for h in 0..hz {
                let w = cache.width(h);
                for i in 0..class.step_len(h) {
                    for j in 0..w {
                        let jj = (h + 1 < hz).then_some(j);
                        if set.pair_survives(h, i, jj) {
                            worst = worst.max(dot(&cum_occ[h], &residuals[h][i * w + j]));
                        }
                    }
                }
            }
            run.kappa = run.kappa.max(worst / cfg.beta);
        }

        let tuple = set.optimistic(class, mdp.s_init()).expect("nonempty confidence set has an optimistic member");
        let policy = tuple_policy(class, &tuple);
        let occ = occupancy_measures(mdp, &policy)?;
        let episode = sample_episode(mdp, &policy, &mut rng);
        let gap = match cfg.regret_mode {
            RegretMode::Exact => {
                let v: f64 = (0..hz).map(|h| dot(occ.step(h), mdp.rewards_at(h))).sum();
                (v_star - v).max(0.0)
            }
            RegretMode::Sampled => v_star - episode.iter().map(|tr| tr.r).sum::<f64>(),
        };
        cum_regret += gap;
        cache.extend(class, &episode);
        for (acc, h) in cum_occ.iter_mut().zip(0..hz) {
            acc.iter_mut().zip(occ.step(h)).for_each(|(a, r)| *a += r);
        }
        if next_cp.peek() == Some(&&t) {
            next_cp.next();
            trace.rows.push(TraceRow {
                t,
                cum_regret,
                per_episode_gap: gap,
                survivors: Some(set.size),
                qstar_in_set: qstar_in,
                ..Default::default()
            });
        }
        if let Some(occs) = run.occupancies.as_mut() {
            occs.push(occ);
        }
        run.selections.push(tuple);
    }
    trace.episodes = cfg.episodes;
    trace.meta.insert("kappa".into(), run.kappa);
    trace.meta.insert("empty_set_events".into(), run.empty_set_episodes.len() as f64);
    trace.meta.insert("v_star".into(), v_star);
    run.trace = trace;
    Ok(run)
}
