use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Policy, RewardNoise, TabularMdp};
use crate::rng::sample_index;

/// One observed step `(h, s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub h: usize,
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
}

/// Roll out one episode of `H` transitions from `s_init`.
pub fn sample_episode<R: Rng + ?Sized>(mdp: &TabularMdp, policy: &Policy, rng: &mut R) -> Vec<Transition> {
    let mut s = mdp.s_init();
    let mut out = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let a = policy.act(h, s, rng);
        let (r, s_next) = sample_step(mdp, h, s, a, rng);
        out.push(Transition { h, s, a, r, s_next });
        s = s_next;
    }
    out
}

/// Draw reward and next state for a single `(h, s, a)`.
pub(crate) fn sample_step<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    h: usize,
    s: usize,
    a: usize,
    rng: &mut R,
) -> (f64, usize) {
    let mean = mdp.reward(h, s, a);
    let r = match mdp.reward_noise() {
        RewardNoise::Deterministic => mean,
        RewardNoise::Bernoulli => {
            if rng.gen::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
    };
    let s_next = sample_index(mdp.next_dist(h, s, a), rng);
    (r, s_next)
}
