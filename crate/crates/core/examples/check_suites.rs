//! Run every numerical check suite on its default seeded corpus.

use coverage_lab::theory::run_suite;

fn main() -> coverage_lab::Result<()> {
    let report = run_suite("all", 0)?;
    for r in &report.results {
        println!("{:<22} {}  margin {:.3e}  trials {}", r.name, r.status(), r.margin, r.trials);
    }
    println!("all passed: {}", report.ok());
    Ok(())
}
