//! GOLF on a Bellman-closed class over a random 3-state MDP, with a
//! log-log fit of cumulative regret.

use coverage_lab::agents::{golf_beta, run_golf, GolfConfig};
use coverage_lab::harness::{closed_class_instance, fit_scaling, ClosedClassSpec};

fn main() -> coverage_lab::Result<()> {
    let (mdp, class) = closed_class_instance(&ClosedClassSpec::default(), 2)?;
    let episodes = 2000;
    let beta = golf_beta(class.size(), episodes, mdp.horizon(), 0.05, 1.0);
    let run = run_golf(&mdp, &class, &GolfConfig::new(beta, episodes), 2)?;

    println!("class size {}, beta {beta:.2}, final regret {:.3}", class.size(), run.trace.final_regret());
    let fit = fit_scaling(&run.trace, 10)?;
    println!("regret ~ t^{:.3} (R^2 = {:.3}, {} points)", fit.exponent, fit.r2, fit.points);
    println!("largest potential ratio seen: {:.3}", run.kappa);
    Ok(())
}
