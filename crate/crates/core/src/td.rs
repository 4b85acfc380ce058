//! The random TD(0) update direction and checkers for its elementary bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ground_truth::steady_state_direction;
use crate::mrp::{MarkovRewardProcess, Observation, StationaryDistribution};

/// Absolute slack, scaled by `1 + rhs`, allowed before a bound counts as violated.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TdDirection {
    pub vector: DVector<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Temporal-difference error `r + gamma <phi_s', theta> - <phi_s, theta>`.
#[inline]
pub fn td_error(phi: &FeatureMatrix, gamma: f64, theta: &[f64], obs: &Observation) -> f64 {
    obs.reward + gamma * dot(phi.row(obs.next_state), theta) - dot(phi.row(obs.state), theta)
}

/// Adds `g(theta, obs)` into `acc` in place.
#[inline]
pub(crate) fn accumulate_direction(
    phi: &FeatureMatrix,
    gamma: f64,
    theta: &[f64],
    obs: &Observation,
    acc: &mut [f64],
) {
    let delta = td_error(phi, gamma, theta, obs);
    for (a, f) in acc.iter_mut().zip(phi.row(obs.state)) {
        *a += delta * f;
    }
}

fn check_obs(phi: &FeatureMatrix, obs: &Observation) -> Result<()> {
    let n = phi.n();
    for s in [obs.state, obs.next_state] {
        if s >= n {
            return Err(Error::OutOfRange(format!("state {s} with n = {n}")));
        }
    }
    Ok(())
}

/// `g(theta, o) = (r + gamma <phi_s', theta> - <phi_s, theta>) phi_s`.
pub fn td_direction(
    phi: &FeatureMatrix,
    gamma: f64,
    theta: &DVector<f64>,
    obs: &Observation,
) -> Result<TdDirection> {
    if theta.len() != phi.m() {
        return Err(Error::DimensionMismatch {
            expected: phi.m(),
            got: theta.len(),
        });
    }
    check_obs(phi, obs)?;
    let delta = td_error(phi, gamma, theta.as_slice(), obs);
    let vector = DVector::from_iterator(phi.m(), phi.row(obs.state).iter().map(|f| delta * f));
    Ok(TdDirection { vector })
}

/// Linear part of `g(., o)`: `phi_s (gamma phi_s' - phi_s)^T`.
pub fn td_jacobian(phi: &FeatureMatrix, gamma: f64, obs: &Observation) -> DMatrix<f64> {
    let s = phi.row(obs.state);
    let s_next = phi.row(obs.next_state);
    DMatrix::from_fn(phi.m(), phi.m(), |i, j| s[i] * (gamma * s_next[j] - s[j]))
}

/// Worst-case ratios of `|g(theta, o)|` against `2|theta| + 2 r_bar` and of
/// `|g|^2` against `8(|theta|^2 + sigma^2)` with the smallest admissible
/// `sigma = max(1, r_bar)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    pub samples: usize,
    pub max_ratio: f64,
    pub max_squared_ratio: f64,
    pub violations: usize,
}

impl NormBoundReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

pub fn check_norm_bound(
    phi: &FeatureMatrix,
    gamma: f64,
    reward_bound: f64,
    samples: &[(DVector<f64>, Observation)],
) -> Result<NormBoundReport> {
    let sigma = reward_bound.max(1.0);
    let mut report = NormBoundReport {
        samples: samples.len(),
        max_ratio: 0.0,
        max_squared_ratio: 0.0,
        violations: 0,
    };
    for (theta, obs) in samples {
        let g = td_direction(phi, gamma, theta, obs)?.vector.norm();
        let t = theta.norm();
        let rhs = 2.0 * t + 2.0 * reward_bound;
        let rhs_sq = 8.0 * (t * t + sigma * sigma);
        report.max_ratio = report.max_ratio.max(g / rhs);
        report.max_squared_ratio = report.max_squared_ratio.max(g * g / rhs_sq);
        if g > rhs + BOUND_SLACK * (1.0 + rhs) || g * g > rhs_sq + BOUND_SLACK * (1.0 + rhs_sq) {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Worst Lipschitz ratios `|g(a) - g(b)| / |a - b|` over sampled pairs, for
/// the sampled direction and optionally the steady-state one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub pairs: usize,
    pub max_ratio: f64,
    pub max_steady_ratio: Option<f64>,
    pub violations: usize,
}

impl LipschitzReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

pub fn check_lipschitz(
    phi: &FeatureMatrix,
    gamma: f64,
    pairs: &[(DVector<f64>, DVector<f64>, Observation)],
    steady: Option<(&MarkovRewardProcess, &StationaryDistribution)>,
) -> Result<LipschitzReport> {
    let mut report = LipschitzReport {
        pairs: pairs.len(),
        max_ratio: 0.0,
        max_steady_ratio: steady.map(|_| 0.0),
        violations: 0,
    };
    let violated = |lhs: f64, dist: f64| lhs > 2.0 * dist + BOUND_SLACK * (1.0 + 2.0 * dist);
    for (a, b, obs) in pairs {
        let dist = (a - b).norm();
        let diff = (td_direction(phi, gamma, a, obs)?.vector
            - td_direction(phi, gamma, b, obs)?.vector)
            .norm();
        if dist > 0.0 {
            report.max_ratio = report.max_ratio.max(diff / dist);
        }
        let mut bad = violated(diff, dist);
        if let Some((mrp, pi)) = steady {
            let steady_diff = (steady_state_direction(mrp, phi, pi, a)?
                - steady_state_direction(mrp, phi, pi, b)?)
            .norm();
            if dist > 0.0 {
                let r = report.max_steady_ratio.get_or_insert(0.0);
                *r = r.max(steady_diff / dist);
            }
            bad |= violated(steady_diff, dist);
        }
        if bad {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// `E_{s ~ pi, s' ~ P(.|s)} g(theta, (s, r_s, s'))` by exhaustive enumeration.
pub fn enumerated_mean_direction(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    pi: &StationaryDistribution,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mut mean = DVector::zeros(phi.m());
    for s in 0..mrp.n() {
        for (s_next, &p) in mrp.kernel().row(s).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let obs = Observation {
                state: s,
                reward: mrp.rewards()[s],
                next_state: s_next,
            };
            mean += td_direction(phi, mrp.gamma(), theta, &obs)?.vector * (pi.get(s) * p);
        }
    }
    Ok(mean)
}
