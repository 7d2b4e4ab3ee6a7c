//! LSVI-UCB on a random linear MDP, checked against the feature-norm
//! sandwich and the elliptical potential bound.

use coverage_lab::lsvi::{make_random_linear_mdp, run_lsvi, FeatureStructure, LsviConfig};
use coverage_lab::theory::{verify_elliptical_potential, verify_phi_bounds_run};

fn main() -> coverage_lab::Result<()> {
    let mdp = make_random_linear_mdp(4, 6, 2, 3, FeatureStructure::LowVariance, 9)?;
    let run = run_lsvi(&mdp, &LsviConfig::new(2000), 9)?;
    println!(
        "d = {}, lambda = {}, beta = {:.3}, final regret {:.3}",
        run.dim,
        run.lambda,
        run.beta,
        run.trace.final_regret()
    );
    let last = run.trace.rows.last().expect("trace has a final row");
    println!("bound on regret from optimism: {:.3}", last.optimism_bound.unwrap_or(f64::NAN));

    let sandwich = verify_phi_bounds_run(&run);
    println!("feature-norm sandwich: {} (margin {:.2e})", sandwich.status(), sandwich.margin);
    for (h, seq) in run.visited.iter().enumerate() {
        let feats: Vec<Vec<f64>> = seq.iter().map(|&z| mdp.phi_pair(z).to_vec()).collect();
        let r = verify_elliptical_potential(&feats, run.lambda, run.dim)?;
        println!("step {h}: potential {:.2} <= {:.2}", r.details["potential"], r.details["bound"]);
    }
    Ok(())
}
