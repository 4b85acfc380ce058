//! Empirical checks of the second-moment and drift bounds on recorded
//! ensembles. Expectations are averages over the replications.

use serde::{Deserialize, Serialize};

use super::run::{delta_kh, RunRecord};
use crate::error::{Error, Result};

/// Constants shared by the ensemble checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConstants {
    pub alpha: f64,
    pub sigma: f64,
    pub q: u32,
    /// Mixing time at precision `alpha^q`.
    pub tau: usize,
    pub tau_max: usize,
    pub n_agents: usize,
}

impl EnsembleConstants {
    fn alpha_2q(&self) -> f64 {
        self.alpha.powi(2 * self.q as i32)
    }
}

/// Mean of `delta_j^2` over the ensemble at each step.
pub fn mean_delta_sq(records: &[RunRecord]) -> Result<Vec<f64>> {
    let first = records
        .first()
        .ok_or_else(|| Error::MissingInput("empty ensemble".into()))?;
    let len = first.delta_sq.len();
    if records.iter().any(|r| r.delta_sq.len() != len) {
        return Err(Error::Config("ensemble trajectories differ in length".into()));
    }
    let r = records.len() as f64;
    Ok((0..len)
        .map(|k| records.iter().map(|rec| rec.delta_sq[k]).sum::<f64>() / r)
        .collect())
}

fn window_max(values: &[f64], lo: usize, hi: usize) -> f64 {
    values[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Outcome of a bound check at sampled steps; `margin = min(rhs - lhs)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub points: Vec<MomentPoint>,
    pub margin: f64,
    pub max_ratio: f64,
}

impl BoundCheckReport {
    fn from_points(points: Vec<MomentPoint>) -> Self {
        let margin = points
            .iter()
            .map(|p| p.rhs - p.lhs)
            .fold(f64::INFINITY, f64::min);
        let max_ratio = points
            .iter()
            .map(|p| if p.rhs > 0.0 { p.lhs / p.rhs } else { f64::INFINITY })
            .fold(0.0, f64::max);
        BoundCheckReport {
            points,
            margin,
            max_ratio,
        }
    }

    pub fn holds(&self) -> bool {
        self.margin >= 0.0
    }
}

fn sample_steps(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if hi < lo || count == 0 {
        return Vec::new();
    }
    let span = hi - lo;
    let count = count.min(span + 1);
    if count == 1 {
        return vec![hi];
    }
    let mut ks: Vec<usize> = (0..count).map(|i| lo + i * span / (count - 1)).collect();
    ks.dedup();
    ks
}

/// Second-moment bound on the server direction at `num_samples` evenly
/// spaced steps `k >= tau + tau_max`:
/// `E|v_k|^2 <= 8 max_{k - tau_max <= j <= k} E delta_j^2 + 32 sigma^2 / N + 8 sigma^2 alpha^{2q}`.
pub fn check_vk_second_moment(
    records: &[RunRecord],
    c: &EnsembleConstants,
    num_samples: usize,
) -> Result<BoundCheckReport> {
    let v: Vec<&Vec<f64>> = records
        .iter()
        .map(|r| r.v_norm_sq.as_ref().ok_or(Error::TrajectoryNotRecorded))
        .collect::<Result<_>>()?;
    let mean_d = mean_delta_sq(records)?;
    let steps = v[0].len();
    let r = records.len() as f64;
    let sigma_sq = c.sigma * c.sigma;
    let noise = 32.0 * sigma_sq / c.n_agents as f64 + 8.0 * sigma_sq * c.alpha_2q();
    let points = sample_steps(c.tau + c.tau_max, steps.saturating_sub(1), num_samples)
        .into_iter()
        .map(|k| {
            let lhs = v.iter().map(|vk| vk[k]).sum::<f64>() / r;
            let rhs = 8.0 * window_max(&mean_d, k - c.tau_max, k) + noise;
            MomentPoint { k, lhs, rhs }
        })
        .collect();
    Ok(BoundCheckReport::from_points(points))
}

/// Drift bound over `h` steps at sampled `k >= tau + 2 tau_max` with `k >= tau_max + h`:
/// `E delta_{k,h}^2 <= 8 alpha^2 h^2 (d_k + 4 sigma^2 / N + sigma^2 alpha^{2q})`,
/// `d_k = max_{k - 2 tau_max - tau <= j <= k} E delta_j^2`.
pub fn check_drift_bound(
    records: &[RunRecord],
    c: &EnsembleConstants,
    horizons: &[usize],
    num_samples: usize,
) -> Result<BoundCheckReport> {
    let mean_d = mean_delta_sq(records)?;
    let last = mean_d.len() - 1;
    let r = records.len() as f64;
    let sigma_sq = c.sigma * c.sigma;
    let mut points = Vec::new();
    for &h in horizons {
        let start = (c.tau + 2 * c.tau_max).max(c.tau_max + h);
        for k in sample_steps(start, last, num_samples) {
            let mut lhs = 0.0;
            for rec in records {
                let d = delta_kh(rec, k, h)?;
                lhs += d * d;
            }
            lhs /= r;
            let d_k = window_max(&mean_d, k - 2 * c.tau_max - c.tau, k);
            let hf = h as f64;
            let rhs = 8.0
                * c.alpha
                * c.alpha
                * hf
                * hf
                * (d_k + 4.0 * sigma_sq / c.n_agents as f64 + sigma_sq * c.alpha_2q());
            points.push(MomentPoint { k, lhs, rhs });
        }
    }
    Ok(BoundCheckReport::from_points(points))
}
