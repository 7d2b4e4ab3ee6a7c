//! Coverability restricted to policies near a reference, and the trade-off
//! between the in-class and out-of-class terms as the radius grows.

use coverage_lab::coverage::{p_cov, p_out, partial_class, zeta_tradeoff};
use coverage_lab::harness::random_tabular;
use coverage_lab::mdp::{enumerate_policies, optimal_values};

fn main() -> coverage_lab::Result<()> {
    let mdp = random_tabular(3, 2, 3, 3)?;
    let class = enumerate_policies(&mdp, 1 << 20)?;
    let reference = optimal_values(&mdp).policy;
    let c1 = mdp.horizon() as f64;

    let near = partial_class(&mdp, &class, &reference, 0.5)?;
    println!(
        "zeta = 0.5: {} members, P_cov = {:.4}, P_out = {:.4}",
        near.members.len(),
        p_cov(&mdp, &class, &near)?.value,
        p_out(&mdp, &class, &near, c1)?.value
    );

    let grid: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();
    let table = zeta_tradeoff(&mdp, &class, &reference, &grid, c1)?;
    println!("{:>6} {:>8} {:>10} {:>10} {:>10}", "zeta", "members", "P_cov", "P_out", "bound");
    for row in &table.rows {
        println!("{:>6.2} {:>8} {:>10.4} {:>10.4} {:>10.4}", row.zeta, row.members, row.p_cov, row.p_out, row.bound);
    }
    println!("minimum at zeta = {}", table.rows[table.argmin].zeta);
    Ok(())
}
