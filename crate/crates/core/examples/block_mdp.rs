//! Block MDPs: many observations, few latent states. Coverability depends
//! on the latent count, not on the observation count.

use coverage_lab::coverage::c_cov;
use coverage_lab::harness::block_mdp;
use coverage_lab::mdp::PolicyClass;

fn main() -> coverage_lab::Result<()> {
    let (latents, actions) = (2, 2);
    for obs in [1, 2, 4, 8] {
        let mdp = block_mdp(latents, obs, actions, 2, 1)?;
        let v = c_cov(&mdp, &PolicyClass::AllDeterministic { cap: 1 << 40 })?.value;
        println!(
            "{obs} observations per latent: |S||A| = {:>3}, C_cov = {v:.4} <= kA = {}",
            mdp.n_states() * mdp.n_actions(),
            latents * actions
        );
    }
    Ok(())
}
