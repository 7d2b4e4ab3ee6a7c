//! Acceptance criteria 1 to 11. Each test prints one `PASS`/`FAIL` line
//! straight to stderr (bypassing output capture) and then asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use coverage_lab::agents::{
    golf_beta, make_offline_dataset, run_golf, run_hybridq, Behavior, GolfConfig, HybridConfig,
};
use coverage_lab::coverage::{c_cov, p_cov, p_out, partial_class, CwSolverConfig, DataDistribution};
use coverage_lab::harness::{
    bandit, bandit_class, block_mdp, closed_class_instance, fit_scaling, median, random_tabular, ClosedClassSpec,
};
use coverage_lab::lsvi::{
    feature_coverage_gamma, make_random_linear_mdp, run_lsvi, variance_profile, FeatureStructure, LsviAgent, LsviConfig,
};
use coverage_lab::mdp::{enumerate_policies, occupancy_measures, LinearMdp, PolicyClass, TabularMdp};
use coverage_lab::rng::{seeded, stream, stream_seed};
use coverage_lab::theory::{
    admissible_sequence, random_potential_setup, verify_cw_le_cov, verify_elliptical_potential,
    verify_pcov_equivalence, verify_per_sa_potential, verify_phi_bounds, verify_phi_bounds_run, verify_popoviciu,
    verify_regret_dominance, verify_rhomu, CheckResult, PcovCase,
};

const CAP: u64 = 1 << 12;

fn report(id: u32, pass: bool, elapsed: Duration, limit: Duration, detail: String) {
    let in_time = elapsed <= limit;
    let status = if pass && in_time { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "criterion {id:>2}: {status}  {detail}  [{:.2}s, limit {}s]",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(pass, "criterion {id} failed: {detail}");
    assert!(in_time, "criterion {id} exceeded its time limit: {:.2}s", elapsed.as_secs_f64());
}

/// Random MDPs with `S <= 3`, `A <= 2`, `H <= 3` (at most 512 deterministic
/// policies).
fn small_corpus(n: u64) -> Vec<TabularMdp> {
    let mut rng = seeded(1);
    (0..n)
        .map(|k| {
            let s = rng.gen_range(1..=3);
            let a = rng.gen_range(1..=2);
            let h = rng.gen_range(1..=3);
            random_tabular(s, a, h, stream_seed(11, k)).unwrap()
        })
        .collect()
}

#[test]
fn criterion_01_reach_dp_matches_enumeration() {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for m in small_corpus(50) {
        let explicit = enumerate_policies(&m, CAP).unwrap();
        assert!(explicit.policies().unwrap().len() <= 512);
        let a = c_cov(&m, &PolicyClass::AllDeterministic { cap: CAP }).unwrap().value;
        let b = c_cov(&m, &explicit).unwrap().value;
        worst = worst.max((a - b).abs());
    }
    report(
        1,
        worst <= 1e-12,
        start.elapsed(),
        Duration::from_secs(10),
        format!("max |reach-DP - enumeration| = {worst:.3e}"),
    );
}

#[test]
fn criterion_02_cw_below_cov() {
    let start = Instant::now();
    let r = verify_cw_le_cov(&small_corpus(50), &[1.0, 2.0, 4.0], &CwSolverConfig::default()).unwrap();
    report(
        2,
        r.pass,
        start.elapsed(),
        Duration::from_secs(60),
        format!("{} trials, worst margin {:.3e} at {}", r.trials, r.margin, r.witness),
    );
}

#[test]
fn criterion_03_partial_coverage_endpoints() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let grid: Vec<f64> = (0..9).map(|k| k as f64 * 0.25).collect();
    let mut unique_refs = 0;
    for m in small_corpus(20) {
        let class = enumerate_policies(&m, CAP).unwrap();
        let policies = class.policies().unwrap();
        let occs: Vec<_> = policies.iter().map(|p| occupancy_measures(&m, p).unwrap()).collect();
        let cov = c_cov(&m, &class).unwrap().value;
        // first policy whose occupancy is shared by no other policy
        let unique = (0..policies.len()).find(|&i| (0..policies.len()).all(|j| j == i || occs[j] != occs[i]));
        if let Some(i) = unique {
            unique_refs += 1;
            let pc = partial_class(&m, &class, &policies[i], 0.0).unwrap();
            let v = p_cov(&m, &class, &pc).unwrap().value;
            if (v - 1.0).abs() > 1e-12 {
                failures.push(format!("P_cov(0) = {v}"));
            }
        }
        let reference = &policies[0];
        let full = partial_class(&m, &class, reference, 2.0).unwrap();
        let pc = p_cov(&m, &class, &full).unwrap().value;
        let po = p_out(&m, &class, &full, m.horizon() as f64).unwrap().value;
        if (pc - cov).abs() > 1e-9 {
            failures.push(format!("P_cov(2) = {pc} vs C_cov = {cov}"));
        }
        if po != 0.0 {
            failures.push(format!("P_out(2) = {po}"));
        }
        let path: Vec<f64> = grid
            .iter()
            .map(|&z| p_cov(&m, &class, &partial_class(&m, &class, reference, z).unwrap()).unwrap().value)
            .collect();
        if path.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            failures.push(format!("P_cov not monotone: {path:?}"));
        }
    }
    let cases: Vec<PcovCase> = (0..8)
        .map(|k| {
            let (s, a) = if k % 2 == 0 { (2, 2) } else { (3, 1) };
            let mdp = random_tabular(s, a, 2, stream_seed(31, k)).unwrap();
            let reference = enumerate_policies(&mdp, CAP).unwrap().materialize(&mdp).unwrap().swap_remove(0);
            PcovCase { mdp, reference }
        })
        .collect();
    let inf = verify_pcov_equivalence(&cases, &[0.0, 0.25, 0.5, 1.0, 2.0]).unwrap();
    if !inf.pass {
        failures.push(format!("inf-form gap {:.3e} at {}", -inf.margin, inf.witness));
    }
    if unique_refs == 0 {
        failures.push("no unique-occupancy reference in the corpus".into());
    }
    report(
        3,
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(30),
        format!(
            "{unique_refs} unique-reference instances, inf-form worst gap {:.3e}; {}",
            -inf.margin,
            if failures.is_empty() { "all endpoint checks hold".to_string() } else { failures.join("; ") }
        ),
    );
}

#[test]
fn criterion_04_golf() {
    let start = Instant::now();
    let episodes = 500;
    let kept = (0..100u64)
        .filter(|&k| {
            let mut rng = stream(41, k);
            let m = bandit(&[rng.gen::<f64>(), rng.gen::<f64>()]).unwrap();
            let class = bandit_class(&m, 10).unwrap();
            let beta = golf_beta(class.size(), episodes, 1, 0.05, 1.0);
            let run = run_golf(&m, &class, &GolfConfig::new(beta, episodes), k).unwrap();
            run.qstar_always_in_set == Some(true)
        })
        .count();

    let spec = ClosedClassSpec::default();
    let mut exponents = Vec::new();
    let mut r2 = Vec::new();
    for k in 0..10u64 {
        let (m, class) = closed_class_instance(&spec, k).unwrap();
        let beta = golf_beta(class.size(), 2000, m.horizon(), 0.05, 1.0);
        let run = run_golf(&m, &class, &GolfConfig::new(beta, 2000), k).unwrap();
        let fit = fit_scaling(&run.trace, 10).unwrap();
        exponents.push(fit.exponent);
        r2.push(fit.r2);
    }
    let (e, r) = (median(&exponents).unwrap(), median(&r2).unwrap());
    report(
        4,
        kept >= 95 && e < 0.8 && r > 0.9,
        start.elapsed(),
        Duration::from_secs(300),
        format!("Q* kept in {kept}/100 bandit runs; closed corpus median exponent {e:.3}, median R^2 {r:.3}"),
    );
}

#[test]
fn criterion_05_hybrid_q() {
    let start = Instant::now();
    let spec = ClosedClassSpec::default();
    let episodes = 1000;
    let mut exponents = Vec::new();
    let mut err = [Vec::new(), Vec::new()];
    for k in 0..10u64 {
        let (m, class) = closed_class_instance(&spec, k).unwrap();
        let nu = DataDistribution::uniform(m.horizon(), m.n_states(), m.n_actions());
        for (slot, n_off) in [500, 1000].into_iter().enumerate() {
            let offline = make_offline_dataset(&m, Behavior::Distribution(&nu), n_off, stream_seed(k, 1)).unwrap();
            let trace = run_hybridq(&m, &class, &offline, &HybridConfig::new(episodes), k).unwrap();
            err[slot].push(trace.rows.last().unwrap().max_offline_bellman_sq.unwrap());
            if n_off == episodes {
                exponents.push(fit_scaling(&trace, 10).unwrap().exponent);
            }
        }
    }
    let e = median(&exponents).unwrap();
    let (e500, e1000) = (median(&err[0]).unwrap(), median(&err[1]).unwrap());
    let shrink = e500 / e1000;
    report(
        5,
        e < 0.9 && shrink >= 1.5,
        start.elapsed(),
        Duration::from_secs(300),
        format!("median exponent {e:.3}; offline error median {e500:.3e} -> {e1000:.3e} (x{shrink:.2})"),
    );
}

/// From-scratch backward pass: rebuild `Lambda_h` and the targets from the
/// raw data and solve the normal equations directly.
fn normal_equation_weights(mdp: &LinearMdp, agent: &LsviAgent) -> Vec<DVector<f64>> {
    let (hz, ns, na, d) = (mdp.horizon(), mdp.n_states(), mdp.n_actions(), mdp.dim());
    let mut v_next = vec![0.0; ns];
    let mut out = vec![DVector::zeros(d); hz];
    for h in (0..hz).rev() {
        let mut lambda = DMatrix::identity(d, d) * agent.lambda();
        let mut b = DVector::zeros(d);
        for tr in agent.data(h) {
            let phi = DVector::from_column_slice(mdp.phi(tr.s, tr.a));
            lambda += &phi * phi.transpose();
            b += &phi * (tr.r + v_next[tr.s_next]);
        }
        let chol = lambda.cholesky().expect("ridge matrix is positive definite");
        let w = chol.solve(&b);
        let inv = chol.inverse();
        for s in 0..ns {
            v_next[s] = (0..na)
                .map(|a| {
                    let phi = DVector::from_column_slice(mdp.phi(s, a));
                    let bonus = agent.beta() * phi.dot(&(&inv * &phi)).max(0.0).sqrt();
                    (phi.dot(&w) + bonus).min(agent.v_max())
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
        out[h] = w;
    }
    out
}

#[test]
fn criterion_06_lsvi_matches_normal_equations() {
    let start = Instant::now();
    let checkpoints = [1, 2, 5, 10, 50, 100, 250, 500, 750, 1000];
    let mut worst = 0.0_f64;
    let mut compared = 0;
    for k in 0..3u64 {
        let tab = random_tabular(4, 2, 3, stream_seed(61, k)).unwrap();
        let lin = LinearMdp::one_hot(&tab).unwrap();
        assert!(lin.dim() <= 8);
        let mut agent = LsviAgent::new(&lin, LsviConfig::new(1000), k).unwrap();
        for t in 1..=1000 {
            agent.step().unwrap();
            if checkpoints.contains(&t) {
                agent.plan().unwrap();
                let oracle = normal_equation_weights(&lin, &agent);
                for (h, w) in oracle.iter().enumerate() {
                    let diff = agent.weights(h).iter().zip(w.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    worst = worst.max(diff);
                }
                compared += 1;
            }
        }
    }
    report(
        6,
        worst <= 1e-9,
        start.elapsed(),
        Duration::from_secs(60),
        format!("{compared} checkpoints, max weight difference {worst:.3e}"),
    );
}

#[test]
fn criterion_07_sandwich_and_elliptical_potential() {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut potential = Vec::new();
    for k in 0..3u64 {
        let m = make_random_linear_mdp(4, 6, 2, 3, FeatureStructure::LowVariance, stream_seed(71, k)).unwrap();
        let run = run_lsvi(&m, &LsviConfig::new(5000), k).unwrap();
        parts.push(verify_phi_bounds_run(&run));
        parts.push(verify_phi_bounds(&run.trace));
        for seq in &run.visited {
            let feats: Vec<Vec<f64>> = seq.iter().map(|&z| m.phi_pair(z).to_vec()).collect();
            potential.push(verify_elliptical_potential(&feats, run.lambda, m.dim()).unwrap());
        }
    }
    let sandwich = CheckResult::merge("phi_bounds", 1e-9, parts);
    let ellip = CheckResult::merge("elliptical_potential", 1e-9, potential);
    report(
        7,
        sandwich.pass && ellip.pass,
        start.elapsed(),
        Duration::from_secs(60),
        format!(
            "sandwich {} (margin {:.3e}, {} observations); potential {} (margin {:.3e}, {} sequences)",
            sandwich.status(),
            sandwich.margin,
            sandwich.trials,
            ellip.status(),
            ellip.margin,
            ellip.trials
        ),
    );
}

#[test]
fn criterion_08_coverage_and_regret_dominance() {
    let start = Instant::now();
    let mut rhomu = Vec::new();
    let mut dominated = 0;
    for k in 0..10u64 {
        let m = make_random_linear_mdp(3, 6, 2, 3, FeatureStructure::Generic, stream_seed(81, k)).unwrap();
        let mu = DataDistribution::uniform(3, 6, 2);
        let gamma = feature_coverage_gamma(&m, &mu).unwrap();
        assert!(gamma > 0.0, "instance {k} has no feature coverage");
        let mut cfg = LsviConfig::new(2000);
        cfg.coverage_mu = Some(mu);
        let run = run_lsvi(&m, &cfg, k).unwrap();
        rhomu.push(verify_rhomu(&run, gamma));
        if verify_regret_dominance(&run.trace).pass {
            dominated += 1;
        }
    }
    let r = CheckResult::merge("rhomu", 1e-12, rhomu);
    report(
        8,
        r.pass && dominated >= 9,
        start.elapsed(),
        Duration::from_secs(180),
        format!(
            "coverage inequality {} (margin {:.3e} at {}); regret dominated in {dominated}/10 runs",
            r.status(),
            r.margin,
            r.witness
        ),
    );
}

#[test]
fn criterion_09_low_variance_machinery() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..8).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
    let mut bounds = Vec::new();
    let mut alphas = [Vec::new(), Vec::new()];
    for k in 0..10u64 {
        for (slot, structure) in [FeatureStructure::Generic, FeatureStructure::LowVariance].into_iter().enumerate() {
            let m = make_random_linear_mdp(4, 6, 2, 3, structure, stream_seed(91, k)).unwrap();
            let mu = DataDistribution::uniform(3, 6, 2);
            let diag = variance_profile(&m, &mu, &grid, 200, k).unwrap();
            bounds.push(verify_popoviciu(&diag));
            alphas[slot].push(diag.alpha_hat.unwrap_or(f64::NAN));
        }
    }
    let pop = CheckResult::merge("popoviciu", 1e-12, bounds);
    let (generic, low) = (median(&alphas[0]).unwrap_or(f64::NAN), median(&alphas[1]).unwrap_or(f64::NAN));
    report(
        9,
        pop.pass && low >= generic + 0.3,
        start.elapsed(),
        Duration::from_secs(120),
        format!(
            "variance bound {} (margin {:.3e}); median alpha generic {generic:.3}, low-variance {low:.3}",
            pop.status(),
            pop.margin
        ),
    );
}

#[test]
fn criterion_10_per_pair_potential() {
    let start = Instant::now();
    let parts: Vec<CheckResult> = (0..100u64)
        .map(|k| {
            let mut rng = stream(101, k);
            let (mu, c, p) = random_potential_setup(6, &mut rng);
            let seq = admissible_sequence(&mu, c, p, 5000, &mut rng).unwrap();
            verify_per_sa_potential(&seq, &mu, c, p).unwrap()
        })
        .collect();
    let r = CheckResult::merge("per_sa_potential", 0.0, parts);
    report(
        10,
        r.pass,
        start.elapsed(),
        Duration::from_secs(30),
        format!(
            "{} sequences, worst kappa {:.3} (limit 4)",
            r.trials,
            r.details.get("kappa").copied().unwrap_or(f64::NAN)
        ),
    );
}

#[test]
fn criterion_11_block_mdp_coverability() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut cases = 0;
    for (k, (latents, obs, actions, horizon)) in
        [(2, 2, 2, 2), (2, 3, 2, 2), (3, 2, 2, 2), (1, 4, 3, 2), (2, 2, 3, 2), (2, 4, 2, 2)].into_iter().enumerate()
    {
        let m = block_mdp(latents, obs, actions, horizon, stream_seed(111, k as u64)).unwrap();
        let v = c_cov(&m, &PolicyClass::AllDeterministic { cap: 1 << 22 }).unwrap().value;
        let bound = (latents * actions) as f64;
        let pairs = m.n_states() * m.n_actions();
        cases += 1;
        if v > bound + 1e-9 || pairs != latents * obs * actions {
            failures.push(format!("k={latents} obs={obs} A={actions}: C_cov {v} vs kA {bound}, |S||A| {pairs}"));
        }
    }
    report(
        11,
        failures.is_empty(),
        start.elapsed(),
        Duration::from_secs(10),
        if failures.is_empty() { format!("{cases} block MDPs within kA") } else { failures.join("; ") },
    );
}
