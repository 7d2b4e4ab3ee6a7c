//! GOLF on a two-armed Bernoulli bandit: the true arm means stay inside the
//! confidence set while the set shrinks.

use coverage_lab::agents::{golf_beta, run_golf, GolfConfig};
use coverage_lab::harness::{bandit, bandit_class};

fn main() -> coverage_lab::Result<()> {
    let mdp = bandit(&[0.35, 0.6])?;
    let class = bandit_class(&mdp, 20)?;
    let episodes = 500;
    let beta = golf_beta(class.size(), episodes, 1, 0.05, 1.0);
    let run = run_golf(&mdp, &class, &GolfConfig::new(beta, episodes), 1)?;

    println!("class size {}, beta {beta:.3}", class.size());
    for row in run.trace.rows.iter().step_by(4) {
        println!(
            "t = {:>4}  regret {:>8.3}  surviving {:>6}",
            row.t,
            row.cum_regret,
            row.survivors.unwrap_or(f64::NAN)
        );
    }
    println!("arm means kept in every confidence set: {:?}", run.qstar_always_in_set);
    Ok(())
}
