//! Build a small MDP by hand, solve it by dynamic programming and inspect
//! the occupancy measure of its optimal policy.

use coverage_lab::mdp::{occupancy_measures, optimal_values, policy_value, Policy, TabularMdp};

fn main() -> coverage_lab::Result<()> {
    // two states, two actions, two steps; transitions are [h][s][a][s']
    let step = vec![vec![vec![0.9, 0.1], vec![0.2, 0.8]], vec![vec![0.5, 0.5], vec![0.0, 1.0]]];
    let rewards = vec![vec![0.1, 0.4], vec![0.3, 0.0]];
    let mdp = TabularMdp::new(0, vec![step.clone(), step], vec![rewards.clone(), rewards])?;

    let opt = optimal_values(&mdp);
    println!("V*(s_init) = {:.4}", opt.v_init(&mdp));
    for h in 0..mdp.horizon() {
        println!("Q*_{h} = {:?}", opt.q_step(h, mdp.n_pairs()));
    }

    let occ = occupancy_measures(&mdp, &opt.policy)?;
    for h in 0..mdp.horizon() {
        println!("rho_{h} = {:?}", occ.step(h));
    }

    let uniform = Policy::uniform(mdp.horizon(), mdp.n_states(), mdp.n_actions());
    println!("uniform policy value = {:.4}", policy_value(&mdp, &uniform)?);
    Ok(())
}
