//! Decay of the variance of the feature norm in the regulariser, for generic
//! and for equal-norm features.

use coverage_lab::coverage::DataDistribution;
use coverage_lab::lsvi::{feature_coverage_gamma, make_random_linear_mdp, variance_profile, FeatureStructure};
use coverage_lab::theory::verify_popoviciu;

fn main() -> coverage_lab::Result<()> {
    let grid: Vec<f64> = (0..8).map(|k| 10f64.powf(k as f64 / 2.0)).collect();
    let mu = DataDistribution::uniform(3, 6, 2);
    for structure in [FeatureStructure::Generic, FeatureStructure::LowVariance] {
        let mdp = make_random_linear_mdp(4, 6, 2, 3, structure, 4)?;
        let diag = variance_profile(&mdp, &mu, &grid, 200, 4)?;
        println!(
            "{structure:?}: gamma {:.4}, alpha {:?}, variance bound {}",
            feature_coverage_gamma(&mdp, &mu)?,
            diag.alpha_hat,
            verify_popoviciu(&diag).status()
        );
        for (l, v) in diag.lambda_grid.iter().zip(&diag.variance_samples) {
            println!("  lambda {l:>9.2}  variance {v:.3e}");
        }
    }
    Ok(())
}
