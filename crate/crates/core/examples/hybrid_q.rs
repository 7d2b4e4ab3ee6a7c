//! Hybrid-Q: fitted Q-iteration over offline data from a uniform behaviour
//! distribution plus the agent's own rollouts. More offline data drives the
//! offline Bellman error down.

use coverage_lab::agents::{make_offline_dataset, run_hybridq, Behavior, HybridConfig};
use coverage_lab::coverage::DataDistribution;
use coverage_lab::harness::{closed_class_instance, ClosedClassSpec};
use coverage_lab::rng::stream_seed;

fn main() -> coverage_lab::Result<()> {
    let (mdp, class) = closed_class_instance(&ClosedClassSpec::default(), 5)?;
    let nu = DataDistribution::uniform(mdp.horizon(), mdp.n_states(), mdp.n_actions());
    for n_off in [100, 500, 1000] {
        let offline = make_offline_dataset(&mdp, Behavior::Distribution(&nu), n_off, stream_seed(5, 1))?;
        let trace = run_hybridq(&mdp, &class, &offline, &HybridConfig::new(1000), 5)?;
        let last = trace.rows.last().expect("trace has a final row");
        println!(
            "n_off = {n_off:>4}: regret {:.4}, offline Bellman error {:.3e}",
            trace.final_regret(),
            last.max_offline_bellman_sq.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
