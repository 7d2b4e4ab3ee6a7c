use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LinearMdp, RewardNoise, TabularMdp};
use crate::{LabError, Result};

/// A loaded environment of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Tabular(TabularMdp),
    Linear(LinearMdp),
}

impl Environment {
    /// The tabular model (induced, for linear environments).
    pub fn tabular(&self) -> &TabularMdp {
        match self {
            Environment::Tabular(m) => m,
            Environment::Linear(l) => l.tabular(),
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.tabular().is_normalized()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MdpFile = serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        file.into_environment()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MdpFile::from_environment(self)).expect("MDP file is serializable")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum MdpFile {
    Tabular {
        #[serde(rename = "H")]
        horizon: usize,
        #[serde(rename = "S")]
        n_states: usize,
        #[serde(rename = "A")]
        n_actions: usize,
        s_init: usize,
        #[serde(rename = "P")]
        transitions: Vec<Vec<Vec<Vec<f64>>>>,
        r: Vec<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "is_deterministic")]
        reward_noise: RewardNoise,
    },
    Linear {
        #[serde(rename = "H")]
        horizon: usize,
        #[serde(rename = "S")]
        n_states: usize,
        #[serde(rename = "A")]
        n_actions: usize,
        s_init: usize,
        d: usize,
        phi: Vec<Vec<Vec<f64>>>,
        psi: Vec<Vec<Vec<f64>>>,
        theta: Vec<Vec<f64>>,
    },
}

fn is_deterministic(noise: &RewardNoise) -> bool {
    *noise == RewardNoise::Deterministic
}

impl MdpFile {
    fn into_environment(self) -> Result<Environment> {
        match self {
            MdpFile::Tabular { horizon, n_states, n_actions, s_init, transitions, r, reward_noise } => {
                check_shape4(&transitions, horizon, n_states, n_actions, n_states, "P")?;
                check_shape3(&r, horizon, n_states, n_actions, "r")?;
                Ok(Environment::Tabular(TabularMdp::new(s_init, transitions, r)?.with_reward_noise(reward_noise)))
            }
            MdpFile::Linear { horizon, n_states, n_actions, s_init, d, phi, psi, theta } => {
                check_shape3(&phi, n_states, n_actions, d, "phi")?;
                check_shape3(&psi, horizon, n_states, d, "psi")?;
                if theta.len() != horizon || theta.iter().any(|t| t.len() != d) {
                    return Err(LabError::Validation(format!("theta is not a {horizon}x{d} table")));
                }
                Ok(Environment::Linear(LinearMdp::new(s_init, phi, psi, theta)?))
            }
        }
    }

    fn from_environment(env: &Environment) -> Self {
        match env {
            Environment::Tabular(m) => {
                let (hz, ns, na) = (m.horizon(), m.n_states(), m.n_actions());
                let transitions = (0..hz)
                    .map(|h| (0..ns).map(|s| (0..na).map(|a| m.next_dist(h, s, a).to_vec()).collect()).collect())
                    .collect();
                let r =
                    (0..hz).map(|h| (0..ns).map(|s| (0..na).map(|a| m.reward(h, s, a)).collect()).collect()).collect();
                MdpFile::Tabular {
                    horizon: hz,
                    n_states: ns,
                    n_actions: na,
                    s_init: m.s_init(),
                    transitions,
                    r,
                    reward_noise: m.reward_noise(),
                }
            }
            Environment::Linear(l) => {
                let (hz, ns, na, d) = (l.horizon(), l.n_states(), l.n_actions(), l.dim());
                MdpFile::Linear {
                    horizon: hz,
                    n_states: ns,
                    n_actions: na,
                    s_init: l.s_init(),
                    d,
                    phi: (0..ns).map(|s| (0..na).map(|a| l.phi(s, a).to_vec()).collect()).collect(),
                    psi: (0..hz).map(|h| (0..ns).map(|sn| l.psi(h, sn).to_vec()).collect()).collect(),
                    theta: (0..hz).map(|h| l.theta(h).to_vec()).collect(),
                }
            }
        }
    }
}

fn check_shape3<T>(t: &[Vec<Vec<T>>], n0: usize, n1: usize, n2: usize, name: &str) -> Result<()> {
    if t.len() != n0 {
        return Err(LabError::Validation(format!("{name} has {} rows, expected {n0}", t.len())));
    }
    for (i, a) in t.iter().enumerate() {
        if a.len() != n1 {
            return Err(LabError::Validation(format!("{name}[{i}] has {} rows, expected {n1}", a.len())));
        }
        for (j, b) in a.iter().enumerate() {
            if b.len() != n2 {
                return Err(LabError::Validation(format!("{name}[{i}][{j}] has {} entries, expected {n2}", b.len())));
            }
        }
    }
    Ok(())
}

fn check_shape4(t: &[Vec<Vec<Vec<f64>>>], n0: usize, n1: usize, n2: usize, n3: usize, name: &str) -> Result<()> {
    if t.len() != n0 {
        return Err(LabError::Validation(format!("{name} has {} steps, expected {n0}", t.len())));
    }
    for (i, step) in t.iter().enumerate() {
        check_shape3(step, n1, n2, n3, &format!("{name}[{i}]"))?;
    }
    Ok(())
}

/// Read and validate an MDP file.
pub fn load_mdp(path: impl AsRef<Path>) -> Result<Environment> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| LabError::io(path.as_ref(), e))?;
    Environment::from_json(&text)
}

/// Write an MDP file (write to a temporary sibling, then rename).
pub fn save_mdp(env: &Environment, path: impl AsRef<Path>) -> Result<()> {
    crate::harness::write_atomic(path.as_ref(), env.to_json().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_file_loads_normalized() {
        let text = r#"{"kind":"tabular","H":2,"S":1,"A":1,"s_init":0,
            "P":[[[[1.0]]],[[[1.0]]]],"r":[[[0.5]],[[0.5]]]}"#;
        let env = Environment::from_json(text).unwrap();
        assert!(env.is_normalized());
        assert_eq!(env.tabular().horizon(), 2);
    }

    #[test]
    fn bad_row_sum_is_a_validation_error() {
        let text = r#"{"kind":"tabular","H":1,"S":2,"A":1,"s_init":0,
            "P":[[[[0.5,0.4]],[[1.0,0.0]]]],"r":[[[0.0],[0.0]]]}"#;
        let err = Environment::from_json(text).unwrap_err();
        assert!(matches!(err, LabError::Validation(_)));
        assert!(err.to_string().contains("P[0][0][0]"), "{err}");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(Environment::from_json("{\"kind\":\"tabular\""), Err(LabError::Parse(_))));
        assert!(matches!(Environment::from_json("{\"kind\":\"cubic\"}"), Err(LabError::Parse(_))));
    }

    #[test]
    fn linear_file_with_one_hot_features() {
        let text = r#"{"kind":"linear","H":1,"S":2,"A":1,"s_init":0,"d":2,
            "phi":[[[1.0,0.0]],[[0.0,1.0]]],
            "psi":[[[0.25,1.0],[0.75,0.0]]],
            "theta":[[0.3,0.6]]}"#;
        let env = Environment::from_json(text).unwrap();
        let tab = env.tabular();
        assert_eq!(tab.next_dist(0, 0, 0), &[0.25, 0.75]);
        assert_eq!(tab.next_dist(0, 1, 0), &[1.0, 0.0]);
        assert_eq!(tab.reward(0, 1, 0), 0.6);
    }

    #[test]
    fn round_trip_through_json() {
        let text = r#"{"kind":"tabular","H":1,"S":2,"A":2,"s_init":1,
            "P":[[[[0.5,0.5],[1.0,0.0]],[[0.0,1.0],[0.25,0.75]]]],"r":[[[0.1,0.2],[0.3,0.4]]],
            "reward_noise":"bernoulli"}"#;
        let env = Environment::from_json(text).unwrap();
        assert_eq!(Environment::from_json(&env.to_json()).unwrap(), env);
    }
}
