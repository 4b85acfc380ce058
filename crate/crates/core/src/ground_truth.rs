//! Exact solvers for the quantities the analysis treats as known.
//!
//! Everything here is a dense direct solve; the instances of interest have
//! at most a few hundred states.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::mrp::{MarkovRewardProcess, StationaryDistribution};

fn check_dims(mrp: &MarkovRewardProcess, phi: &FeatureMatrix) -> Result<()> {
    if phi.n() != mrp.n() {
        return Err(Error::DimensionMismatch {
            expected: mrp.n(),
            got: phi.n(),
        });
    }
    Ok(())
}

/// Exact value function `(I - gamma P)^{-1} r`.
pub fn exact_value(mrp: &MarkovRewardProcess) -> Result<DVector<f64>> {
    let n = mrp.n();
    let system = DMatrix::<f64>::identity(n, n) - mrp.kernel().matrix() * mrp.gamma();
    system
        .lu()
        .solve(mrp.rewards())
        .ok_or(Error::Singular("value function"))
}

/// Linear part `Phi^T D (gamma P - I) Phi` of the steady-state direction.
pub fn steady_state_matrix(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    pi: &StationaryDistribution,
) -> DMatrix<f64> {
    let n = mrp.n();
    let propagate = mrp.kernel().matrix() * mrp.gamma() - DMatrix::<f64>::identity(n, n);
    let weighted = weight_rows(phi.matrix(), pi.as_vector());
    weighted.tr_mul(&(propagate * phi.matrix()))
}

/// Constant part `Phi^T D r` of the steady-state direction.
pub fn steady_state_offset(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    pi: &StationaryDistribution,
) -> DVector<f64> {
    let weighted = weight_rows(phi.matrix(), pi.as_vector());
    weighted.tr_mul(mrp.rewards())
}

/// `diag(w) * a`.
pub(crate) fn weight_rows(a: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for (mut row, &wi) in out.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    out
}

/// `g_bar(theta) = Phi^T D (r + gamma P Phi theta - Phi theta)`.
pub fn steady_state_direction(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    pi: &StationaryDistribution,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(mrp, phi)?;
    let value = phi.approximate_value(theta)?;
    let td_error =
        mrp.rewards() + (mrp.kernel().matrix() * &value) * mrp.gamma() - &value;
    let weighted: DVector<f64> = td_error.component_mul(pi.as_vector());
    Ok(phi.matrix().tr_mul(&weighted))
}

/// Projected Bellman fixed point: `Phi^T D (I - gamma P) Phi theta = Phi^T D r`.
pub fn theta_star(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    pi: &StationaryDistribution,
) -> Result<DVector<f64>> {
    check_dims(mrp, phi)?;
    let system = -steady_state_matrix(mrp, phi, pi);
    let rhs = steady_state_offset(mrp, phi, pi);
    system
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular("projected Bellman fixed point"))
}

/// Smallest eigenvalue of `Sigma = Phi^T D Phi`.
pub fn omega(phi: &FeatureMatrix, pi: &StationaryDistribution) -> Result<f64> {
    if phi.n() != pi.as_vector().len() {
        return Err(Error::DimensionMismatch {
            expected: pi.as_vector().len(),
            got: phi.n(),
        });
    }
    let sigma = weight_rows(phi.matrix(), pi.as_vector()).tr_mul(phi.matrix());
    let sym = (&sigma + sigma.transpose()) * 0.5;
    let smallest = sym.symmetric_eigenvalues().min();
    if smallest > 0.0 {
        Ok(smallest)
    } else {
        Err(Error::NonPositiveOmega(smallest))
    }
}

/// `max{1, r_bar, |theta*|, |theta_0 - theta*|}`.
pub fn sigma_const(reward_bound: f64, theta_star: &DVector<f64>, theta_0: &DVector<f64>) -> f64 {
    let delta_0 = (theta_0 - theta_star).norm();
    [1.0, reward_bound, theta_star.norm(), delta_0]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ground truth of one (instance, theta_0) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub pi: StationaryDistribution,
    pub value: DVector<f64>,
    pub theta_star: DVector<f64>,
    pub sigma_matrix: DMatrix<f64>,
    pub omega: f64,
    pub sigma_const: f64,
}

impl GroundTruth {
    pub fn compute(
        mrp: &MarkovRewardProcess,
        phi: &FeatureMatrix,
        theta_0: &DVector<f64>,
    ) -> Result<Self> {
        check_dims(mrp, phi)?;
        if theta_0.len() != phi.m() {
            return Err(Error::DimensionMismatch {
                expected: phi.m(),
                got: theta_0.len(),
            });
        }
        let pi = StationaryDistribution::of(mrp.kernel())?;
        let value = exact_value(mrp)?;
        let theta_star = theta_star(mrp, phi, &pi)?;
        let sigma_matrix = weight_rows(phi.matrix(), pi.as_vector()).tr_mul(phi.matrix());
        let omega = omega(phi, &pi)?;
        let sigma_const = sigma_const(mrp.reward_bound(), &theta_star, theta_0);
        Ok(GroundTruth {
            pi,
            value,
            theta_star,
            sigma_matrix,
            omega,
            sigma_const,
        })
    }

    pub fn report(&self) -> GroundTruthReport {
        GroundTruthReport {
            theta_star: self.theta_star.iter().copied().collect(),
            omega: self.omega,
            sigma_const: self.sigma_const,
            value: self.value.iter().copied().collect(),
        }
    }
}

/// Exported form of [`GroundTruth`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthReport {
    pub theta_star: Vec<f64>,
    pub omega: f64,
    pub sigma_const: f64,
    pub value: Vec<f64>,
}

/// Worst ratio of `<theta* - theta, g_bar(theta)>` to `omega (1 - gamma) |theta* - theta|^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub min_ratio: f64,
    pub violations: usize,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `<theta* - theta, g_bar(theta)> >= omega (1 - gamma) |theta* - theta|^2`
/// at each sample, with `1e-9` absolute slack.
pub fn check_monotonicity(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    gt: &GroundTruth,
    thetas: &[DVector<f64>],
) -> Result<MonotonicityReport> {
    let modulus = gt.omega * (1.0 - mrp.gamma());
    let mut report = MonotonicityReport {
        samples: thetas.len(),
        min_ratio: f64::INFINITY,
        violations: 0,
    };
    for theta in thetas {
        let gap = &gt.theta_star - theta;
        let lhs = gap.dot(&steady_state_direction(mrp, phi, &gt.pi, theta)?);
        let rhs = modulus * gap.norm_squared();
        if rhs > 0.0 {
            report.min_ratio = report.min_ratio.min(lhs / rhs);
        }
        if lhs < rhs - 1e-9 {
            report.violations += 1;
        }
    }
    Ok(report)
}
