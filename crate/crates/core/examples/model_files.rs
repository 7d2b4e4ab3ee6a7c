//! Save a generated model as JSON, load it back, and round-trip a regret
//! trace through CSV.

use coverage_lab::agents::{golf_beta, run_golf, GolfConfig};
use coverage_lab::harness::{build_class, chain, ClassSpec};
use coverage_lab::mdp::{load_mdp, save_mdp, Environment};
use coverage_lab::trace::read_trace_rows;

fn main() -> coverage_lab::Result<()> {
    let dir = std::env::temp_dir().join("coverage-lab-files");
    let model = dir.join("chain.json");
    save_mdp(&Environment::Tabular(chain(2, 3, 4)?), &model)?;
    let env = load_mdp(&model)?;
    let mdp = env.tabular();
    println!("loaded {} states, {} actions, horizon {}", mdp.n_states(), mdp.n_actions(), mdp.horizon());

    let class = build_class(mdp, &ClassSpec::default())?;
    let beta = golf_beta(class.size(), 200, mdp.horizon(), 0.05, 1.0);
    let run = run_golf(mdp, &class, &GolfConfig::new(beta, 200), 0)?;
    let csv = dir.join("golf.csv");
    run.trace.write_csv(&csv)?;
    let rows = read_trace_rows(&csv)?;
    println!(
        "{} rows written and read back, final regret {:.4}",
        rows.len(),
        rows.last().map_or(0.0, |r| r.cum_regret)
    );
    Ok(())
}
