use serde::{Deserialize, Serialize};

use crate::trace::RegretTrace;
use crate::{LabError, Result};

const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `(first t, last t)` of the checkpoints used.
    pub range: (usize, usize),
    pub points: usize,
    /// Regret was identically zero on the range; the exponent is reported as 0.
    pub zero_regret: bool,
}

/// Least squares of `log regret` on `log t` over checkpoints with
/// `t >= t_min` and positive regret.
pub fn fit_scaling(trace: &RegretTrace, t_min: usize) -> Result<ScalingFit> {
    let eligible: Vec<(usize, f64)> = trace.rows.iter().filter(|r| r.t >= t_min).map(|r| (r.t, r.cum_regret)).collect();
    fit_points(&eligible)
}

pub(crate) fn fit_points(eligible: &[(usize, f64)]) -> Result<ScalingFit> {
    if eligible.len() >= MIN_POINTS && eligible.iter().all(|(_, r)| *r == 0.0) {
        return Ok(ScalingFit {
            exponent: 0.0,
            intercept: f64::NEG_INFINITY,
            r2: 1.0,
            range: (eligible[0].0, eligible[eligible.len() - 1].0),
            points: eligible.len(),
            zero_regret: true,
        });
    }
    let pts: Vec<(usize, f64, f64)> =
        eligible.iter().filter(|(t, r)| *r > 0.0 && *t > 0).map(|&(t, r)| (t, (t as f64).ln(), r.ln())).collect();
    if pts.len() < MIN_POINTS {
        return Err(LabError::InsufficientCheckpoints { have: pts.len(), need: MIN_POINTS });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.2).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.1 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::InsufficientCheckpoints { have: 1, need: MIN_POINTS });
    }
    let sxy: f64 = pts.iter().map(|p| (p.1 - mx) * (p.2 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.2 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.2 - intercept - slope * p.1).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(ScalingFit {
        exponent: slope,
        intercept,
        r2,
        range: (pts[0].0, pts[pts.len() - 1].0),
        points: pts.len(),
        zero_regret: false,
    })
}
