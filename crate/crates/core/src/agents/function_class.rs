use serde::{Deserialize, Serialize};

use crate::mdp::{bellman_apply, optimal_values, TabularMdp};
use crate::{LabError, Result};

/// Values may exceed the ceiling or dip below zero by this much.
const RANGE_TOL: f64 = 1e-9;

/// A tabular Q-function `[h][s][a]` (flat) with values in `[0, v_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub v_max: f64,
    pub q: Vec<f64>,
}

impl QFunction {
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, v_max: f64, q: Vec<f64>) -> Result<Self> {
        if q.len() != horizon * n_states * n_actions {
            return Err(LabError::DimensionMismatch(format!(
                "Q-function has {} entries, expected {}",
                q.len(),
                horizon * n_states * n_actions
            )));
        }
        check_range(&q, v_max)?;
        Ok(QFunction { horizon, n_states, n_actions, v_max, q })
    }

    pub fn zero(mdp: &TabularMdp) -> Self {
        QFunction {
            horizon: mdp.horizon(),
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            v_max: mdp.value_ceiling(),
            q: vec![0.0; mdp.horizon() * mdp.n_pairs()],
        }
    }

    pub fn step(&self, h: usize) -> &[f64] {
        let n = self.n_states * self.n_actions;
        &self.q[h * n..(h + 1) * n]
    }
}

fn check_range(values: &[f64], v_max: f64) -> Result<()> {
    if let Some((i, v)) =
        values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < -RANGE_TOL || **v > v_max + RANGE_TOL)
    {
        return Err(LabError::OutOfRange(format!("function value {v} at flat index {i} outside [0, {v_max}]")));
    }
    Ok(())
}

/// Outcome of a realizability or completeness scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCheck {
    pub holds: bool,
    pub tol: f64,
    /// Worst step.
    pub step: usize,
    /// Element of `F_h` nearest to the target at the worst step.
    pub nearest: usize,
    /// For completeness: the element of `F_{h+1}` whose image is worst covered.
    pub source: Option<usize>,
    /// Sup-norm distance at the worst step.
    pub distance: f64,
}

/// Finite class of tabular Q-functions with per-step hypothesis sets `F_h`.
///
/// Without `tuples` the class is the full product `F_0 x ... x F_{H-1}`;
/// with `tuples` only the listed index tuples are members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    v_max: f64,
    /// `per_step[h][i]` is a flat `[s][a]` table.
    per_step: Vec<Vec<Vec<f64>>>,
    tuples: Option<Vec<Vec<usize>>>,
    pub realizable: Option<ClassCheck>,
    pub complete: Option<ClassCheck>,
}

impl FunctionClass {
    pub fn product(n_states: usize, n_actions: usize, v_max: f64, per_step: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if per_step.is_empty() {
            return Err(LabError::InvalidArgument("function class needs at least one step".into()));
        }
        for (h, set) in per_step.iter().enumerate() {
            if set.is_empty() {
                return Err(LabError::InvalidArgument(format!("F_{h} is empty")));
            }
            for (i, f) in set.iter().enumerate() {
                if f.len() != n_states * n_actions {
                    return Err(LabError::DimensionMismatch(format!(
                        "F_{h}[{i}] has {} entries, expected {}",
                        f.len(),
                        n_states * n_actions
                    )));
                }
                check_range(f, v_max).map_err(|e| LabError::OutOfRange(format!("F_{h}[{i}]: {e}")))?;
            }
        }
        Ok(FunctionClass {
            horizon: per_step.len(),
            n_states,
            n_actions,
            v_max,
            per_step,
            tuples: None,
            realizable: None,
            complete: None,
        })
    }

    /// Restrict the class to explicit index tuples.
    pub fn with_tuples(mut self, tuples: Vec<Vec<usize>>) -> Result<Self> {
        if tuples.is_empty() {
            return Err(LabError::InvalidArgument("explicit tuple list is empty".into()));
        }
        for t in &tuples {
            if t.len() != self.horizon || t.iter().enumerate().any(|(h, &i)| i >= self.per_step[h].len()) {
                return Err(LabError::OutOfRange(format!("tuple {t:?} does not index the class")));
            }
        }
        self.tuples = Some(tuples);
        Ok(self)
    }

    /// `{f}` for a single flat `[h][s][a]` table, e.g. `Q*`.
    pub fn singleton(mdp: &TabularMdp, q: &[f64]) -> Result<Self> {
        let n = mdp.n_pairs();
        if q.len() != mdp.horizon() * n {
            return Err(LabError::DimensionMismatch(format!(
                "function has {} entries, expected {}",
                q.len(),
                mdp.horizon() * n
            )));
        }
        let per_step = (0..mdp.horizon()).map(|h| vec![q[h * n..(h + 1) * n].to_vec()]).collect();
        Self::product(mdp.n_states(), mdp.n_actions(), mdp.value_ceiling(), per_step)
    }

    /// Product class from whole Q-functions: `F_h` collects every function's
    /// step-`h` table, deduplicated.
    pub fn from_functions(mdp: &TabularMdp, functions: &[QFunction]) -> Result<Self> {
        let mut per_step: Vec<Vec<Vec<f64>>> = vec![Vec::new(); mdp.horizon()];
        for f in functions {
            if (f.horizon, f.n_states, f.n_actions) != (mdp.horizon(), mdp.n_states(), mdp.n_actions()) {
                return Err(LabError::DimensionMismatch("Q-function shape differs from the MDP".into()));
            }
            for (h, set) in per_step.iter_mut().enumerate() {
                push_unique(set, f.step(h).to_vec(), 0.0);
            }
        }
        Self::product(mdp.n_states(), mdp.n_actions(), mdp.value_ceiling(), per_step)
    }

    /// Close seed sets under the Bellman operator, working backward:
    /// `F_{H-1}` gains `r_{H-1}` and each `F_h` gains `T_h f` for every
    /// `f in F_{h+1}`. Images within `tol` of an existing element are merged
    /// and values are clipped into `[0, v_max]`.
    pub fn bellman_closure(mdp: &TabularMdp, seeds: Vec<Vec<Vec<f64>>>, tol: f64) -> Result<Self> {
        if seeds.len() != mdp.horizon() {
            return Err(LabError::DimensionMismatch(format!(
                "{} seed sets for horizon {}",
                seeds.len(),
                mdp.horizon()
            )));
        }
        let v_max = mdp.value_ceiling();
        let mut per_step: Vec<Vec<Vec<f64>>> = vec![Vec::new(); mdp.horizon()];
        for h in (0..mdp.horizon()).rev() {
            let mut set = Vec::new();
            for f in &seeds[h] {
                push_unique(&mut set, clip(f.clone(), v_max), tol);
            }
            if h + 1 == mdp.horizon() {
                push_unique(&mut set, clip(mdp.rewards_at(h).to_vec(), v_max), tol);
            } else {
                for f_next in &per_step[h + 1] {
                    push_unique(&mut set, clip(bellman_apply(mdp, f_next, h), v_max), tol);
                }
            }
            per_step[h] = set;
        }
        Self::product(mdp.n_states(), mdp.n_actions(), v_max, per_step)
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

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn step_len(&self, h: usize) -> usize {
        self.per_step[h].len()
    }

    pub fn step_sizes(&self) -> Vec<usize> {
        self.per_step.iter().map(Vec::len).collect()
    }

    pub fn get(&self, h: usize, i: usize) -> &[f64] {
        &self.per_step[h][i]
    }

    pub fn is_product(&self) -> bool {
        self.tuples.is_none()
    }

    pub fn tuples(&self) -> Option<&[Vec<usize>]> {
        self.tuples.as_deref()
    }

    /// Number of member functions, as `f64` since product classes overflow
    /// integer types quickly.
    pub fn size(&self) -> f64 {
        match &self.tuples {
            Some(t) => t.len() as f64,
            None => self.per_step.iter().map(|s| s.len() as f64).product(),
        }
    }

    /// Whole function for an index tuple.
    pub fn function(&self, tuple: &[usize]) -> QFunction {
        let q = tuple.iter().enumerate().flat_map(|(h, &i)| self.per_step[h][i].iter().copied()).collect();
        QFunction { horizon: self.horizon, n_states: self.n_states, n_actions: self.n_actions, v_max: self.v_max, q }
    }

    pub fn check_dims(&self, mdp: &TabularMdp) -> Result<()> {
        if (self.horizon, self.n_states, self.n_actions) != (mdp.horizon(), mdp.n_states(), mdp.n_actions()) {
            return Err(LabError::DimensionMismatch(format!(
                "function class is (H={}, S={}, A={}) but the MDP is (H={}, S={}, A={})",
                self.horizon,
                self.n_states,
                self.n_actions,
                mdp.horizon(),
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }

    /// Distinct `(f_h, f_{h+1})` index pairs occurring in members; the second
    /// entry is `None` at the last step.
    pub fn step_pairs(&self, h: usize) -> Vec<(usize, Option<usize>)> {
        let last = h + 1 == self.horizon;
        match &self.tuples {
            None => {
                let mut out = Vec::new();
                for i in 0..self.per_step[h].len() {
                    if last {
                        out.push((i, None));
                    } else {
                        out.extend((0..self.per_step[h + 1].len()).map(|j| (i, Some(j))));
                    }
                }
                out
            }
            Some(tuples) => {
                let mut out: Vec<(usize, Option<usize>)> =
                    tuples.iter().map(|t| (t[h], if last { None } else { Some(t[h + 1]) })).collect();
                out.sort_unstable();
                out.dedup();
                out
            }
        }
    }

    /// Index of an element of `F_h` within sup-norm `tol` of `target`.
    pub fn find(&self, h: usize, target: &[f64], tol: f64) -> Option<usize> {
        self.per_step[h].iter().position(|f| sup_dist(f, target) <= tol)
    }

    /// Run both assumption checks against `mdp` and cache the results.
    pub fn annotate(&mut self, mdp: &TabularMdp, tol: f64) -> Result<()> {
        self.realizable = Some(check_realizability(self, mdp, tol)?);
        self.complete = Some(check_completeness(self, mdp, tol)?);
        Ok(())
    }
}

fn clip(mut f: Vec<f64>, v_max: f64) -> Vec<f64> {
    f.iter_mut().for_each(|x| *x = x.clamp(0.0, v_max));
    f
}

fn push_unique(set: &mut Vec<Vec<f64>>, f: Vec<f64>, tol: f64) {
    if !set.iter().any(|g| sup_dist(g, &f) <= tol) {
        set.push(f);
    }
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn nearest(set: &[Vec<f64>], target: &[f64]) -> (usize, f64) {
    set.iter().enumerate().map(|(i, f)| (i, sup_dist(f, target))).fold((0, f64::INFINITY), |best, cur| {
        if cur.1 < best.1 {
            cur
        } else {
            best
        }
    })
}

/// `Q*_h in F_h` within sup-norm `tol` for every `h`. For explicit tuple
/// classes the whole of `Q*` must be a listed tuple.
pub fn check_realizability(class: &FunctionClass, mdp: &TabularMdp, tol: f64) -> Result<ClassCheck> {
    class.check_dims(mdp)?;
    let opt = optimal_values(mdp);
    let n = mdp.n_pairs();
    let mut worst = ClassCheck { holds: true, tol, step: 0, nearest: 0, source: None, distance: -1.0 };
    for h in 0..class.horizon {
        let (i, d) = nearest(&class.per_step[h], opt.q_step(h, n));
        if d > worst.distance {
            worst = ClassCheck { holds: true, tol, step: h, nearest: i, source: None, distance: d };
        }
    }
    worst.holds = worst.distance <= tol;
    if worst.holds {
        if let Some(tuples) = &class.tuples {
            // some listed tuple must be within tol at every step
            worst.holds = tuples
                .iter()
                .any(|t| t.iter().enumerate().all(|(h, &i)| sup_dist(&class.per_step[h][i], opt.q_step(h, n)) <= tol));
        }
    }
    Ok(worst)
}

/// `T_h F_{h+1} subset F_h` within sup-norm `tol`; at the last step the image
/// of the zero function, `r_{H-1}`, must be present.
pub fn check_completeness(class: &FunctionClass, mdp: &TabularMdp, tol: f64) -> Result<ClassCheck> {
    class.check_dims(mdp)?;
    let mut worst = ClassCheck { holds: true, tol, step: 0, nearest: 0, source: None, distance: -1.0 };
    for h in 0..class.horizon {
        let images: Vec<(Option<usize>, Vec<f64>)> = if h + 1 == class.horizon {
            vec![(None, mdp.rewards_at(h).to_vec())]
        } else {
            class.per_step[h + 1].iter().enumerate().map(|(j, f)| (Some(j), bellman_apply(mdp, f, h))).collect()
        };
        for (j, img) in images {
            let (i, d) = nearest(&class.per_step[h], &img);
            if d > worst.distance {
                worst = ClassCheck { holds: true, tol, step: h, nearest: i, source: j, distance: d };
            }
        }
    }
    worst.holds = worst.distance <= tol;
    Ok(worst)
}
