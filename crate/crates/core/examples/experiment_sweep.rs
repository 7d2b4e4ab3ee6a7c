//! A seeded experiment with a hyperparameter sweep: one CSV trace per run
//! plus a summary, rerunnable without recomputation.

use coverage_lab::harness::{run_experiment, ExperimentConfig};

fn main() -> coverage_lab::Result<()> {
    let dir = std::env::temp_dir().join("coverage-lab-sweep");
    let config = format!(
        r#"{{
            "environment": {{ "generator": "random_linear", "params": {{ "d": 4, "S": 6, "A": 2, "H": 3, "seed": 1 }} }},
            "algorithm": "lsvi",
            "episodes": 500,
            "seeds": [1, 2, 3],
            "sweep": {{ "beta_scale": [0.1, 1.0] }},
            "output_dir": {:?}
        }}"#,
        dir
    );
    let cfg = ExperimentConfig::from_json(&config)?;
    let summary = run_experiment(&cfg, 2, false)?;
    for cell in &summary.cells {
        println!(
            "{}: median regret {:?}, median exponent {:?}",
            cell.name, cell.median_final_regret, cell.median_exponent
        );
    }
    let again = run_experiment(&cfg, 2, false)?;
    println!("runs recomputed on the second pass: {}", again.computed);
    println!("outputs in {}", dir.display());
    Ok(())
}
