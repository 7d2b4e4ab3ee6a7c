//! Regret traces: one row per checkpoint episode.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

/// Base CSV columns shared by every agent.
pub const BASE_COLUMNS: [&str; 6] =
    ["t", "cum_regret", "per_episode_gap", "survivors", "qstar_in_set", "max_offline_bellman_sq"];

/// Extra columns written for LSVI-UCB traces.
pub const LSVI_COLUMNS: [&str; 5] = ["bonus_sum", "lemma_e3_bound", "min_phi_norm_sq", "max_phi_norm_sq", "lambda"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Episode index, starting at 1.
    pub t: usize,
    pub cum_regret: f64,
    pub per_episode_gap: f64,
    pub survivors: Option<f64>,
    pub qstar_in_set: Option<bool>,
    pub max_offline_bellman_sq: Option<f64>,
    pub bonus_sum: Option<f64>,
    pub optimism_bound: Option<f64>,
    pub min_phi_norm_sq: Option<f64>,
    pub max_phi_norm_sq: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Golf,
    Hybridq,
    Lsvi,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Golf => "golf",
            Algorithm::Hybridq => "hybridq",
            Algorithm::Lsvi => "lsvi",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "golf" => Ok(Algorithm::Golf),
            "hybridq" => Ok(Algorithm::Hybridq),
            "lsvi" => Ok(Algorithm::Lsvi),
            other => Err(LabError::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Number of episodes actually run.
    pub episodes: usize,
    pub rows: Vec<TraceRow>,
    /// Run-level scalars (clip ceiling, beta, measured kappa, ...).
    pub meta: BTreeMap<String, f64>,
    /// Notable events, e.g. an emptied confidence set.
    pub events: Vec<String>,
}

impl RegretTrace {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        RegretTrace { algorithm, seed, episodes: 0, rows: Vec::new(), meta: BTreeMap::new(), events: Vec::new() }
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Cumulative regret never decreases and `t` strictly increases.
    pub fn is_consistent(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].t > w[0].t && w[1].cum_regret >= w[0].cum_regret)
    }

    pub fn columns(&self) -> Vec<&'static str> {
        let mut cols = BASE_COLUMNS.to_vec();
        if self.algorithm == Algorithm::Lsvi {
            cols.extend(LSVI_COLUMNS);
        }
        cols
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| LabError::Parse(format!("csv: {e}"));
        w.write_record(self.columns()).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![
                row.t.to_string(),
                fmt(Some(row.cum_regret)),
                fmt(Some(row.per_episode_gap)),
                fmt(row.survivors),
                row.qstar_in_set.map_or(String::new(), |b| u8::from(b).to_string()),
                fmt(row.max_offline_bellman_sq),
            ];
            if self.algorithm == Algorithm::Lsvi {
                rec.extend([
                    fmt(row.bonus_sum),
                    fmt(row.optimism_bound),
                    fmt(row.min_phi_norm_sq),
                    fmt(row.max_phi_norm_sq),
                    fmt(row.lambda),
                ]);
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| LabError::Parse(format!("csv: {e}")))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::harness::write_atomic(path.as_ref(), &self.to_csv_bytes()?)
    }
}

fn fmt(v: Option<f64>) -> String {
    // `{:?}` round-trips f64 exactly
    v.map_or(String::new(), |x| format!("{x:?}"))
}

/// Read the rows of a trace CSV written by [`RegretTrace::write_csv`].
pub fn read_trace_rows(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| LabError::Parse(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| LabError::Parse(format!("{}: {e}", path.display())))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| LabError::Parse(format!("{}: {e}", path.display())))?;
        let num = |name: &str| -> Result<Option<f64>> {
            match col(name).and_then(|i| rec.get(i)) {
                None | Some("") => Ok(None),
                Some(v) => v.parse::<f64>().map(Some).map_err(|_| {
                    LabError::Parse(format!("{}: row {}: bad `{name}` value `{v}`", path.display(), line + 1))
                }),
            }
        };
        let t = num("t")?.ok_or_else(|| LabError::Parse(format!("{}: row {}: missing t", path.display(), line + 1)))?;
        rows.push(TraceRow {
            t: t as usize,
            cum_regret: num("cum_regret")?.unwrap_or(0.0),
            per_episode_gap: num("per_episode_gap")?.unwrap_or(0.0),
            survivors: num("survivors")?,
            qstar_in_set: num("qstar_in_set")?.map(|v| v != 0.0),
            max_offline_bellman_sq: num("max_offline_bellman_sq")?,
            bonus_sum: num("bonus_sum")?,
            optimism_bound: num("lemma_e3_bound")?,
            min_phi_norm_sq: num("min_phi_norm_sq")?,
            max_phi_norm_sq: num("max_phi_norm_sq")?,
            lambda: num("lambda")?,
        });
    }
    Ok(rows)
}

/// When to record a trace row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    /// `ceil(ratio^k)` for `k = 0, 1, ...`, deduplicated, plus the last episode.
    Geometric {
        ratio: f64,
    },
    Every,
    Explicit(Vec<usize>),
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::Geometric { ratio: 1.3 }
    }
}

impl Checkpoints {
    /// Sorted checkpoint episodes within `[1, episodes]`.
    pub fn schedule(&self, episodes: usize) -> Vec<usize> {
        if episodes == 0 {
            return Vec::new();
        }
        let mut out = match self {
            Checkpoints::Every => (1..=episodes).collect(),
            Checkpoints::Explicit(ts) => ts.iter().copied().filter(|&t| t >= 1 && t <= episodes).collect(),
            Checkpoints::Geometric { ratio } => {
                assert!(*ratio > 1.0, "geometric ratio must exceed 1");
                let mut v = Vec::new();
                let mut x = 1.0_f64;
                while x.ceil() as usize <= episodes {
                    v.push(x.ceil() as usize);
                    x *= ratio;
                }
                v.push(episodes);
                v
            }
        };
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_schedule_is_deduplicated_and_ends_at_t() {
        let s = Checkpoints::default().schedule(10);
        assert_eq!(s, vec![1, 2, 3, 4, 5, 7, 9, 10]);
        assert!(Checkpoints::default().schedule(0).is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let mut tr = RegretTrace::new(Algorithm::Lsvi, 3);
        tr.rows.push(TraceRow {
            t: 1,
            cum_regret: 0.1,
            per_episode_gap: 0.1,
            bonus_sum: Some(1.0 / 3.0),
            lambda: Some(1.0),
            ..Default::default()
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        tr.write_csv(&path).unwrap();
        let rows = read_trace_rows(&path).unwrap();
        assert_eq!(rows, tr.rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(
            text.starts_with("t,cum_regret,per_episode_gap,survivors,qstar_in_set,max_offline_bellman_sq,bonus_sum")
        );
    }
}
