//! Concentrability and coverability coefficients of a random MDP over its
//! full deterministic policy class.

use coverage_lab::coverage::{c_cov, c_cw, c_infty, CwSolverConfig, DataDistribution};
use coverage_lab::harness::random_tabular;
use coverage_lab::mdp::{enumerate_policies, PolicyClass};

fn main() -> coverage_lab::Result<()> {
    let mdp = random_tabular(3, 2, 3, 7)?;

    // symbolic class: the reachability recursion never materialises policies
    let full = PolicyClass::AllDeterministic { cap: 1 << 20 };
    let cov = c_cov(&mdp, &full)?;
    println!("C_cov = {:.6} (witness step {:?})", cov.value, cov.witness_step);

    let explicit = enumerate_policies(&mdp, 1 << 20)?;
    println!("C_cov by enumeration = {:.6}", c_cov(&mdp, &explicit)?.value);

    let uniform = DataDistribution::uniform(mdp.horizon(), mdp.n_states(), mdp.n_actions());
    println!("C_inf under uniform data = {:.6}", c_infty(&mdp, &explicit, &uniform)?.value);

    for p in [1.0, 2.0, 4.0] {
        let cw = c_cw(&mdp, &explicit, p, &CwSolverConfig::default())?;
        println!("C_cw(p = {p}) = {:.6}, C_cw^(1/p) = {:.6}, gap {:?}", cw.value, cw.value.powf(1.0 / p), cw.gap);
    }
    Ok(())
}
