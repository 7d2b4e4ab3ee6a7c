use super::{ClassOccupancies, CoverageReport};
use crate::mdp::{PolicyClass, TabularMdp};
use crate::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwSolverConfig {
    pub iters: usize,
    /// Base step size; round `k` uses `step / sqrt(k)`.
    pub step: f64,
    /// Absolute duality-gap threshold above which the report is flagged.
    pub gap_tol: f64,
}

impl Default for CwSolverConfig {
    fn default() -> Self {
        CwSolverConfig { iters: 2000, step: 0.5, gap_tol: 1e-2 }
    }
}

/// Solution of one step's inner problem
/// `min_{mu in simplex} max_k sum_z rho_k(z)^p / mu(z)^(p-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CwStepSolution {
    /// Best primal value found (an upper bound on the step optimum).
    pub value: f64,
    /// Dual lower bound from the averaged adversary mixture.
    pub lower_bound: f64,
    /// Objective at the feasible point `mu ∝ sup_k rho_k`.
    pub feasible_value: f64,
    pub mu: Vec<f64>,
    /// Row attaining the maximum at `mu`.
    pub best_response: usize,
    pub iterations: usize,
}

/// `sum_z rho(z)^p / mu(z)^(p-1)` with `0^p / 0 = 0`.
fn lp_ratio(rho: &[f64], mu: &[f64], p: f64) -> f64 {
    rho.iter()
        .zip(mu)
        .map(|(r, m)| {
            if *r <= 0.0 {
                0.0
            } else if *m <= 0.0 {
                f64::INFINITY
            } else {
                r.powf(p) / m.powf(p - 1.0)
            }
        })
        .sum()
}

fn max_row(rows: &[Vec<f64>], mu: &[f64], p: f64) -> (usize, f64) {
    rows.iter().enumerate().map(|(k, r)| (k, lp_ratio(r, mu, p))).fold((0, f64::NEG_INFINITY), |best, cur| {
        if cur.1 > best.1 {
            cur
        } else {
            best
        }
    })
}

/// Closed-form `min_mu sum_z w(z) mu(z)^(1-p)` over the simplex:
/// `(sum_z w(z)^(1/p))^p`, attained at `mu ∝ w^(1/p)`.
fn weighted_min(w: &[f64], p: f64) -> f64 {
    w.iter().map(|x| x.max(0.0).powf(1.0 / p)).sum::<f64>().powf(p)
}

/// Exponentiated-gradient saddle solve for one step.
///
/// The minimising player runs exponentiated gradient on `mu` restricted to the
/// support of `sup_k rho_k` (pairs outside it contribute nothing), with
/// gradients scaled to unit sup-norm. The adversary runs exponentiated gradient
/// on a mixture over rows; its running average certifies a lower bound through
/// the closed-form inner minimum.
pub fn c_cw_step(rows: &[Vec<f64>], p: f64, cfg: &CwSolverConfig) -> CwStepSolution {
    assert!(!rows.is_empty());
    let n = rows[0].len();
    let sup: Vec<f64> = (0..n).map(|z| rows.iter().map(|r| r[z]).fold(0.0, f64::max)).collect();
    let total: f64 = sup.iter().sum();
    let feasible: Vec<f64> = sup.iter().map(|s| s / total).collect();
    let (fr, feasible_value) = max_row(rows, &feasible, p);

    if p == 1.0 {
        // sum_z rho(z) mu(z)^0 = 1 for every member and every mu
        return CwStepSolution {
            value: 1.0,
            lower_bound: 1.0,
            feasible_value: 1.0,
            mu: feasible,
            best_response: fr,
            iterations: 0,
        };
    }

    let support: Vec<usize> = (0..n).filter(|&z| sup[z] > 0.0).collect();
    let sub_rows: Vec<Vec<f64>> = rows.iter().map(|r| support.iter().map(|&z| r[z]).collect()).collect();
    let rows_p: Vec<Vec<f64>> = sub_rows.iter().map(|r| r.iter().map(|x| x.powf(p)).collect()).collect();
    let m = support.len();
    let k_rows = rows.len();

    let mut mu: Vec<f64> = support.iter().map(|&z| feasible[z]).collect();
    let mut best_mu = mu.clone();
    let mut best_val = feasible_value;
    let mut mu_avg = vec![0.0; m];
    let mut q = vec![1.0 / k_rows as f64; k_rows];
    let mut q_avg = vec![0.0; k_rows];
    let mut payoff = vec![0.0; k_rows];

    for it in 1..=cfg.iters {
        let eta = cfg.step / (it as f64).sqrt();
        for (k, row) in rows_p.iter().enumerate() {
            payoff[k] = row.iter().zip(&mu).map(|(r, x)| r * x.powf(1.0 - p)).sum();
        }
        let current = payoff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if current < best_val {
            best_val = current;
            best_mu.clone_from(&mu);
        }
        for (a, x) in mu_avg.iter_mut().zip(&mu) {
            *a += x;
        }
        for (a, x) in q_avg.iter_mut().zip(&q) {
            *a += x;
        }

        // gradient of sum_k q_k f_k(mu)
        let mut grad = vec![0.0; m];
        for (k, row) in rows_p.iter().enumerate() {
            if q[k] == 0.0 {
                continue;
            }
            for z in 0..m {
                grad[z] += q[k] * (1.0 - p) * row[z] * mu[z].powf(-p);
            }
        }
        let scale = grad.iter().fold(0.0_f64, |acc, g| acc.max(g.abs()));
        if scale > 0.0 {
            for (x, g) in mu.iter_mut().zip(&grad) {
                *x *= (-eta * g / scale).exp();
            }
            normalize(&mut mu);
        }

        let pscale = payoff.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if pscale > 0.0 {
            for (w, v) in q.iter_mut().zip(&payoff) {
                *w *= (eta * v / pscale).exp();
            }
            normalize(&mut q);
        }
    }

    let iters = cfg.iters.max(1) as f64;
    mu_avg.iter_mut().for_each(|x| *x /= iters);
    normalize(&mut mu_avg);
    let avg_val = max_over(&rows_p, &mu_avg, p);
    if avg_val < best_val {
        best_val = avg_val;
        best_mu = mu_avg;
    }
    let last_val = max_over(&rows_p, &mu, p);
    if last_val < best_val {
        best_val = last_val;
        best_mu = mu;
    }

    q_avg.iter_mut().for_each(|x| *x /= iters);
    let weights: Vec<f64> = (0..m).map(|z| rows_p.iter().zip(&q_avg).map(|(r, w)| w * r[z]).sum()).collect();
    let lower = weighted_min(&weights, p).max(1.0).min(best_val);

    let mut full_mu = vec![0.0; n];
    for (i, &z) in support.iter().enumerate() {
        full_mu[z] = best_mu[i];
    }
    let (best_response, value) = max_row(rows, &full_mu, p);
    CwStepSolution {
        value,
        lower_bound: lower.min(value),
        feasible_value,
        mu: full_mu,
        best_response,
        iterations: cfg.iters,
    }
}

fn max_over(rows_p: &[Vec<f64>], mu: &[f64], p: f64) -> f64 {
    rows_p
        .iter()
        .map(|row| row.iter().zip(mu).map(|(r, x)| r * x.powf(1.0 - p)).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
}

/// Distinct step-`h` occupancy rows of a class, in first-seen order, with the
/// first policy index producing each.
pub(crate) fn distinct_rows(occs: &ClassOccupancies, h: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut owners = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, occ) in occs.occupancies.iter().enumerate() {
        let row = occ.step(h);
        let key: Vec<u64> = row.iter().map(|x| x.to_bits()).collect();
        if seen.insert(key) {
            rows.push(row.to_vec());
            owners.push(i);
        }
    }
    (rows, owners)
}

/// `L^p` coverability `inf_mu sup_{pi, h} sum rho_h^pi(s,a)^p / mu_h(s,a)^(p-1)`.
///
/// The outer supremum over `h` separates, so each step is solved on its own.
/// `value` and `upper_bound` are the best primal objective found, which is
/// never worse than the feasible point `mu_h ∝ sup_pi rho_h^pi`;
/// `lower_bound` is the largest per-step dual bound.
pub fn c_cw(mdp: &TabularMdp, class: &PolicyClass, p: f64, cfg: &CwSolverConfig) -> Result<CoverageReport> {
    let occs = ClassOccupancies::compute(mdp, class)?;
    c_cw_with(&occs, p, cfg)
}

pub(crate) fn c_cw_with(occs: &ClassOccupancies, p: f64, cfg: &CwSolverConfig) -> Result<CoverageReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(LabError::InvalidArgument(format!("p = {p} must be a finite real >= 1")));
    }
    let mut mu_star = Vec::with_capacity(occs.horizon());
    let mut value = f64::NEG_INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut feasible = f64::NEG_INFINITY;
    let mut witness = (0, 0);
    let mut iterations = 0;
    for h in 0..occs.horizon() {
        let (rows, owners) = distinct_rows(occs, h);
        let sol = c_cw_step(&rows, p, cfg);
        if sol.value > value {
            value = sol.value;
            witness = (h, owners[sol.best_response]);
        }
        lower = lower.max(sol.lower_bound);
        feasible = feasible.max(sol.feasible_value);
        iterations = iterations.max(sol.iterations);
        mu_star.push(sol.mu);
    }
    let mut report = CoverageReport::new("c_cw", value).with_param("p", p);
    report.mu_star = Some(mu_star);
    report.witness_step = Some(witness.0);
    report.witness_policy = Some(witness.1);
    report.upper_bound = Some(value);
    report.lower_bound = Some(lower);
    report.gap = Some(value - lower);
    report.gap_exceeded = value - lower > cfg.gap_tol;
    report.iterations = Some(iterations);
    report.params.insert("feasible_value".into(), feasible);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_one_is_exactly_one() {
        let rows = vec![vec![0.2, 0.8, 0.0], vec![0.5, 0.25, 0.25]];
        let sol = c_cw_step(&rows, 1.0, &CwSolverConfig::default());
        assert_eq!(sol.value, 1.0);
    }

    #[test]
    fn singleton_optimum_is_the_row_itself() {
        let rows = vec![vec![0.3, 0.7]];
        let sol = c_cw_step(&rows, 2.0, &CwSolverConfig::default());
        assert!((sol.value - 1.0).abs() < 1e-12, "{}", sol.value);
        assert!((sol.mu[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn two_point_masses_have_known_value() {
        // rows e1, e2: max(1/mu1^(p-1), 1/mu2^(p-1)) minimised at mu = (1/2, 1/2)
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let sol = c_cw_step(&rows, 2.0, &CwSolverConfig::default());
        assert!((sol.value - 2.0).abs() < 1e-9);
        assert!(sol.lower_bound <= sol.value + 1e-12);
        assert!(sol.value - sol.lower_bound < 1e-2, "gap {}", sol.value - sol.lower_bound);
    }

    #[test]
    fn bounds_bracket_the_value() {
        let rows = vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.1, 0.8], vec![0.3, 0.6, 0.1]];
        for p in [1.5, 2.0, 4.0] {
            let sol = c_cw_step(&rows, p, &CwSolverConfig::default());
            assert!(sol.lower_bound <= sol.value + 1e-12);
            assert!(sol.value <= sol.feasible_value + 1e-12);
        }
    }
}
