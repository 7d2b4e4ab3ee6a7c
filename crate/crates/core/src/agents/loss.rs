use super::FunctionClass;
use crate::mdp::Transition;

/// `max_a f(s, a)` for a flat `[s][a]` table.
#[inline]
pub(crate) fn state_max(f: &[f64], s: usize, n_actions: usize) -> f64 {
    f[s * n_actions..(s + 1) * n_actions].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `sum_{(s,a,r,s') in data} (f_h(s,a) - r - max_a' f_next(s',a'))^2`, with
/// `f_next = None` standing for the zero function after the last step.
pub fn squared_bellman_loss(f_h: &[f64], f_next: Option<&[f64]>, n_actions: usize, data: &[Transition]) -> f64 {
    data.iter()
        .map(|tr| {
            let next = f_next.map_or(0.0, |g| state_max(g, tr.s_next, n_actions));
            let d = f_h[tr.s * n_actions + tr.a] - tr.r - next;
            d * d
        })
        .sum()
}

/// Running losses `L_h(f_h, f_{h+1})` for every index pair of a class,
/// updated in `O(|F_h| |F_{h+1}|)` per appended transition.
#[derive(Debug, Clone)]
pub struct LossCache {
    /// `loss[h][i * width_h + j]`; `width_h = |F_{h+1}|`, or 1 at the last step.
    loss: Vec<Vec<f64>>,
    width: Vec<usize>,
    /// `next_max[h][j][s']` precomputed `max_a f_j(s', a)`.
    next_max: Vec<Vec<Vec<f64>>>,
    counts: Vec<usize>,
}

impl LossCache {
    pub fn new(class: &FunctionClass) -> Self {
        let hz = class.horizon();
        let (ns, na) = (class.n_states(), class.n_actions());
        let mut loss = Vec::with_capacity(hz);
        let mut width = Vec::with_capacity(hz);
        let mut next_max = Vec::with_capacity(hz);
        for h in 0..hz {
            if h + 1 == hz {
                width.push(1);
                next_max.push(vec![vec![0.0; ns]]);
            } else {
                let w = class.step_len(h + 1);
                width.push(w);
                next_max
                    .push((0..w).map(|j| (0..ns).map(|s| state_max(class.get(h + 1, j), s, na)).collect()).collect());
            }
            loss.push(vec![0.0; class.step_len(h) * width[h]]);
        }
        LossCache { loss, width, next_max, counts: vec![0; hz] }
    }

    pub fn push(&mut self, class: &FunctionClass, tr: &Transition) {
        let h = tr.h;
        let na = class.n_actions();
        let z = tr.s * na + tr.a;
        let w = self.width[h];
        let targets: Vec<f64> = self.next_max[h].iter().map(|m| tr.r + m[tr.s_next]).collect();
        for i in 0..class.step_len(h) {
            let v = class.get(h, i)[z];
            let row = &mut self.loss[h][i * w..(i + 1) * w];
            for (l, y) in row.iter_mut().zip(&targets) {
                let d = v - y;
                *l += d * d;
            }
        }
        self.counts[h] += 1;
    }

    pub fn extend<'a>(&mut self, class: &FunctionClass, data: impl IntoIterator<Item = &'a Transition>) {
        for tr in data {
            self.push(class, tr);
        }
    }

    /// `L_h(f_i, f_{h+1} = f_j)`; `j` is ignored at the last step.
    pub fn get(&self, h: usize, i: usize, j: Option<usize>) -> f64 {
        let w = self.width[h];
        self.loss[h][i * w + j.unwrap_or(0).min(w - 1)]
    }

    pub fn count(&self, h: usize) -> usize {
        self.counts[h]
    }

    /// `min_i L_h(f_i, f_j)` for every `j` (a single entry at the last step).
    pub fn column_minima(&self, h: usize) -> Vec<f64> {
        let w = self.width[h];
        let mut mins = vec![f64::INFINITY; w];
        for row in self.loss[h].chunks(w) {
            for (m, l) in mins.iter_mut().zip(row) {
                *m = m.min(*l);
            }
        }
        mins
    }

    /// `admissible[i * width + j]`: `L_h(f_i, f_j) - min_i' L_h(f_i', f_j) <= beta`.
    pub fn admissible(&self, h: usize, beta: f64) -> Vec<bool> {
        let w = self.width[h];
        let mins = self.column_minima(h);
        self.loss[h].iter().enumerate().map(|(k, l)| l - mins[k % w] <= beta).collect()
    }

    pub fn width(&self, h: usize) -> usize {
        self.width[h]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class() -> FunctionClass {
        let per_step = vec![
            vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.5, 0.0, 0.2, 0.9]],
            vec![vec![0.0, 0.3, 0.6, 0.1], vec![0.2, 0.2, 0.2, 0.2], vec![1.0, 0.0, 0.5, 0.5]],
        ];
        FunctionClass::product(2, 2, 1.0, per_step).unwrap()
    }

    fn data() -> Vec<Transition> {
        vec![
            Transition { h: 0, s: 0, a: 1, r: 0.1, s_next: 1 },
            Transition { h: 1, s: 1, a: 0, r: 0.3, s_next: 0 },
            Transition { h: 0, s: 1, a: 1, r: 0.0, s_next: 0 },
        ]
    }

    #[test]
    fn empty_dataset_has_zero_loss() {
        assert_eq!(squared_bellman_loss(&[0.3; 4], None, 2, &[]), 0.0);
    }

    #[test]
    fn consistent_transition_has_zero_loss() {
        let f_next = [0.0, 0.4, 0.2, 0.1];
        let mut f = [0.0; 4];
        f[1] = 0.25 + 0.2; // r + max f_next(s'=1, .)
        let tr = Transition { h: 0, s: 0, a: 1, r: 0.25, s_next: 1 };
        assert_eq!(squared_bellman_loss(&f, Some(&f_next), 2, &[tr]), 0.0);
    }

    #[test]
    fn incremental_cache_matches_recomputation() {
        let c = class();
        let mut cache = LossCache::new(&c);
        cache.extend(&c, &data());
        for h in 0..2 {
            let d: Vec<Transition> = data().into_iter().filter(|t| t.h == h).collect();
            for (i, j) in c.step_pairs(h) {
                let direct = squared_bellman_loss(c.get(h, i), j.map(|j| c.get(h + 1, j)), 2, &d);
                assert!((cache.get(h, i, j) - direct).abs() < 1e-12);
            }
        }
    }
}
