use serde::{Deserialize, Serialize};

use crate::coverage::DataDistribution;
use crate::mdp::{occupancy_measures, sample_step, Policy, TabularMdp, Transition};
use crate::rng::{sample_index, seeded};
use crate::Result;

/// Where offline `(s, a)` pairs come from.
#[derive(Debug, Clone, Copy)]
pub enum Behavior<'a> {
    Distribution(&'a DataDistribution),
    /// `nu_h` is the policy's occupancy measure.
    Policy(&'a Policy),
}

/// `n_off` transitions per step with `(s, a) ~ nu_h` i.i.d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineDataset {
    pub n_off: usize,
    /// `per_step[h]` holds the step-`h` transitions.
    pub per_step: Vec<Vec<Transition>>,
    pub nu: DataDistribution,
}

impl OfflineDataset {
    pub fn is_empty(&self) -> bool {
        self.n_off == 0
    }

    pub fn step(&self, h: usize) -> &[Transition] {
        &self.per_step[h]
    }

    /// Keep only the first `n` transitions of every step.
    pub fn truncated(&self, n: usize) -> OfflineDataset {
        let n = n.min(self.n_off);
        OfflineDataset {
            n_off: n,
            per_step: self.per_step.iter().map(|d| d[..n].to_vec()).collect(),
            nu: self.nu.clone(),
        }
    }
}

pub fn make_offline_dataset(
    mdp: &TabularMdp,
    behavior: Behavior<'_>,
    n_off: usize,
    seed: u64,
) -> Result<OfflineDataset> {
    let nu = match behavior {
        Behavior::Distribution(d) => {
            d.check_dims(mdp.horizon(), mdp.n_states(), mdp.n_actions())?;
            d.clone()
        }
        Behavior::Policy(p) => DataDistribution::from_occupancy(&occupancy_measures(mdp, p)?),
    };
    let mut rng = seeded(seed);
    let na = mdp.n_actions();
    let per_step = (0..mdp.horizon())
        .map(|h| {
            (0..n_off)
                .map(|_| {
                    let z = sample_index(nu.step(h), &mut rng);
                    let (s, a) = (z / na, z % na);
                    let (r, s_next) = sample_step(mdp, h, s, a, &mut rng);
                    Transition { h, s, a, r, s_next }
                })
                .collect()
        })
        .collect();
    Ok(OfflineDataset { n_off, per_step, nu })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mdp() -> TabularMdp {
        let step = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0], vec![0.0, 1.0]]];
        let r = vec![vec![0.0, 0.2], vec![0.1, 0.3]];
        TabularMdp::new(0, vec![step.clone(), step], vec![r.clone(), r]).unwrap()
    }

    #[test]
    fn zero_size_dataset_is_empty() {
        let m = mdp();
        let nu = DataDistribution::uniform(2, 2, 2);
        let d = make_offline_dataset(&m, Behavior::Distribution(&nu), 0, 1).unwrap();
        assert!(d.per_step.iter().all(Vec::is_empty));
    }

    #[test]
    fn point_mass_on_deterministic_mdp_repeats() {
        let m = mdp();
        let pi = Policy::constant(2, 2, 2, 1).unwrap();
        let d = make_offline_dataset(&m, Behavior::Policy(&pi), 20, 5).unwrap();
        for step in &d.per_step {
            assert!(step.iter().all(|t| t == &step[0]));
        }
    }

    #[test]
    fn empirical_frequencies_concentrate() {
        let m = mdp();
        let nu = DataDistribution::uniform(2, 2, 2);
        let n = 100_000;
        let d = make_offline_dataset(&m, Behavior::Distribution(&nu), n, 9).unwrap();
        let mut counts = [0usize; 4];
        for t in &d.per_step[1] {
            counts[t.s * 2 + t.a] += 1;
        }
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() < 3.0 * sigma, "{counts:?}");
        }
    }
}
