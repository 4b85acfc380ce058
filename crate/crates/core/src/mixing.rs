//! Exact conditional TD-direction expectations and the mixing coefficient.
//!
//! The anchor is the chain state `u = s_{k-tau}` at lag `tau`; by the Markov
//! property `E[g(theta, o_k) | s_{k-tau} = u]` is the steady-state formula
//! with `D = diag(pi)` replaced by `diag(p)`, `p = e_u^T P^tau`. With this
//! convention a chain whose rows all equal `pi` is mixed after one step. The gap to the steady-state direction is affine
//! in theta, `A_tau(u) theta + b_tau(u)`, which makes the supremum over all
//! theta in the mixing-time definition computable.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ground_truth::steady_state_direction;
use crate::mrp::{MarkovRewardProcess, StationaryDistribution};
use crate::seed;
use crate::td::td_direction;

/// Default cap on the mixing-time scan.
pub const DEFAULT_SCAN_CAP: usize = 1_000_000;

/// Relative level below which kappa is treated as round-off in fits.
const FIT_FLOOR: f64 = 1e-11;

pub struct MixingAnalyzer<'a> {
    mrp: &'a MarkovRewardProcess,
    phi: &'a FeatureMatrix,
    pi: StationaryDistribution,
    /// `(gamma P - I) Phi`.
    propagate: DMatrix<f64>,
    /// `powers[j] = P^j`.
    powers: Vec<DMatrix<f64>>,
}

impl<'a> MixingAnalyzer<'a> {
    pub fn new(mrp: &'a MarkovRewardProcess, phi: &'a FeatureMatrix) -> Result<Self> {
        if phi.n() != mrp.n() {
            return Err(Error::DimensionMismatch {
                expected: mrp.n(),
                got: phi.n(),
            });
        }
        let n = mrp.n();
        let pi = StationaryDistribution::of(mrp.kernel())?;
        let propagate = (mrp.kernel().matrix() * mrp.gamma() - DMatrix::<f64>::identity(n, n))
            * phi.matrix();
        Ok(MixingAnalyzer {
            mrp,
            phi,
            pi,
            propagate,
            powers: vec![DMatrix::identity(n, n)],
        })
    }

    pub fn stationary(&self) -> &StationaryDistribution {
        &self.pi
    }

    /// Caches `P^j` for every `j <= max_tau`.
    pub fn precompute(&mut self, max_tau: usize) {
        while self.powers.len() <= max_tau {
            let next = self.powers.last().expect("identity is cached") * self.mrp.kernel().matrix();
            self.powers.push(next);
        }
    }

    fn power(&self, j: usize) -> std::borrow::Cow<'_, DMatrix<f64>> {
        if let Some(p) = self.powers.get(j) {
            return std::borrow::Cow::Borrowed(p);
        }
        let mut m = self.powers.last().expect("identity is cached").clone();
        for _ in self.powers.len() - 1..j {
            m *= self.mrp.kernel().matrix();
        }
        std::borrow::Cow::Owned(m)
    }

    fn check_args(&self, theta: Option<&DVector<f64>>, u: usize, tau: usize) -> Result<()> {
        if tau == 0 {
            return Err(Error::OutOfRange("tau must be at least 1".into()));
        }
        if u >= self.mrp.n() {
            return Err(Error::OutOfRange(format!("anchor state {u}")));
        }
        if let Some(t) = theta {
            if t.len() != self.phi.m() {
                return Err(Error::DimensionMismatch {
                    expected: self.phi.m(),
                    got: t.len(),
                });
            }
        }
        Ok(())
    }

    /// `E[g(theta, o_k) | s_{k-tau} = u]`.
    pub fn conditional_expected_direction(
        &self,
        theta: &DVector<f64>,
        u: usize,
        tau: usize,
    ) -> Result<DVector<f64>> {
        self.check_args(Some(theta), u, tau)?;
        let power = self.power(tau);
        let p = power.row(u).transpose();
        let td = self.mrp.rewards() + &self.propagate * theta;
        Ok(self.phi.matrix().tr_mul(&td.component_mul(&p)))
    }

    /// `|E[g(theta, o_k) | s_{k-tau} = u] - g_bar(theta)|`.
    pub fn mu_coefficient(&self, theta: &DVector<f64>, u: usize, tau: usize) -> Result<f64> {
        let cond = self.conditional_expected_direction(theta, u, tau)?;
        let steady = steady_state_direction(self.mrp, self.phi, &self.pi, theta)?;
        Ok((cond - steady).norm())
    }

    /// Affine decomposition `(A_tau(u), b_tau(u))` of the conditional gap.
    pub fn gap_terms(&self, u: usize, tau: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.check_args(None, u, tau)?;
        let power = self.power(tau);
        Ok(self.gap_terms_from_row(power.row(u).iter().copied()))
    }

    fn gap_terms_from_row(&self, row: impl Iterator<Item = f64>) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.mrp.n();
        let m = self.phi.m();
        let weights: Vec<f64> = row
            .zip(self.pi.as_vector().iter())
            .map(|(p, pi)| p - pi)
            .collect();
        let mut a = DMatrix::zeros(m, m);
        let mut b = DVector::zeros(m);
        for s in 0..n {
            let w = weights[s];
            if w == 0.0 {
                continue;
            }
            let f = self.phi.row(s);
            let reward = self.mrp.rewards()[s];
            for i in 0..m {
                let wf = w * f[i];
                b[i] += wf * reward;
                for j in 0..m {
                    a[(i, j)] += wf * self.propagate[(s, j)];
                }
            }
        }
        (a, b)
    }

    fn kappa_from_power(&self, power: &DMatrix<f64>) -> f64 {
        (0..self.mrp.n())
            .map(|u| {
                let (a, b) = self.gap_terms_from_row(power.row(u).iter().copied());
                let op = a.singular_values().max();
                op.max(b.norm())
            })
            .fold(0.0, f64::max)
    }

    /// `kappa(tau) = max_u max(|A_tau(u)|_2, |b_tau(u)|)`, so that
    /// `mu(theta, u, tau) <= kappa(tau) (1 + |theta|)` for every theta.
    pub fn mixing_coefficient(&self, tau: usize) -> Result<f64> {
        self.check_args(None, 0, tau)?;
        Ok(self.kappa_from_power(&self.power(tau)))
    }

    /// Smallest `tau` with `kappa(tau) <= epsilon`, by linear scan up to `cap`.
    pub fn mixing_time(&self, epsilon: f64, cap: usize) -> Result<usize> {
        if !(epsilon > 0.0) {
            return Err(Error::OutOfRange(format!("epsilon = {epsilon} must be positive")));
        }
        let mut power = self.mrp.kernel().matrix().clone();
        for tau in 1..=cap {
            let kappa = match self.powers.get(tau) {
                Some(p) => self.kappa_from_power(p),
                None => self.kappa_from_power(&power),
            };
            if kappa <= epsilon {
                return Ok(tau);
            }
            power = match self.powers.get(tau + 1) {
                Some(p) => p.clone(),
                None => power * self.mrp.kernel().matrix(),
            };
        }
        Err(Error::MixingCapExceeded { epsilon, cap })
    }

    /// `kappa(tau)` for `tau = 1..=max_tau` with a geometric fit.
    pub fn profile(&mut self, max_tau: usize) -> Result<MixingProfile> {
        self.precompute(max_tau);
        let kappa: Vec<f64> = (1..=max_tau)
            .map(|tau| self.kappa_from_power(&self.powers[tau]))
            .collect();
        let head = kappa.iter().copied().fold(0.0, f64::max);
        let points: Vec<(usize, f64)> = kappa
            .iter()
            .enumerate()
            .map(|(i, &k)| (i + 1, k))
            .take_while(|&(_, k)| k > FIT_FLOOR * head)
            .collect();
        let fit = if head == 0.0 {
            GeometricFit::degenerate()
        } else {
            fit_geometric(&points)?
        };
        Ok(MixingProfile { kappa, fit })
    }

    /// Worst ratio `mu(theta, u, tau) / (epsilon (1 + |theta|))` over the given
    /// iterates and every anchor state.
    pub fn check_mixing_bound<'t>(
        &self,
        thetas: impl IntoIterator<Item = &'t [f64]>,
        tau: usize,
        epsilon: f64,
    ) -> Result<MixingBoundReport> {
        let mut report = MixingBoundReport {
            tau,
            epsilon,
            checked: 0,
            max_ratio: 0.0,
            violations: 0,
        };
        for theta in thetas {
            let theta = DVector::from_column_slice(theta);
            let rhs = epsilon * (1.0 + theta.norm());
            for u in 0..self.mrp.n() {
                let mu = self.mu_coefficient(&theta, u, tau)?;
                report.checked += 1;
                report.max_ratio = report.max_ratio.max(mu / rhs);
                if mu > rhs + 1e-12 {
                    report.violations += 1;
                }
            }
        }
        Ok(report)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingBoundReport {
    pub tau: usize,
    pub epsilon: f64,
    pub checked: usize,
    pub max_ratio: f64,
    pub violations: usize,
}

/// `kappa(tau) <= m rho^tau`. `m` is inflated from the least-squares
/// intercept until it covers every fitted point; `inflation` is the factor used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometricFit {
    pub m: f64,
    pub rho: f64,
    pub inflation: f64,
    pub points: usize,
}

impl GeometricFit {
    fn degenerate() -> Self {
        GeometricFit {
            m: 0.0,
            rho: 0.0,
            inflation: 1.0,
            points: 0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.m == 0.0 && self.rho == 0.0
    }
}

/// Least-squares fit of `log kappa` against `tau`.
pub fn fit_geometric(points: &[(usize, f64)]) -> Result<GeometricFit> {
    if points.iter().all(|&(_, k)| k == 0.0) {
        return Ok(GeometricFit::degenerate());
    }
    let positive: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, k)| k > 0.0)
        .map(|&(t, k)| (t as f64, k.ln()))
        .collect();
    if positive.len() < 3 {
        return Err(Error::InsufficientGrid(format!(
            "geometric fit needs 3 positive points, got {}",
            positive.len()
        )));
    }
    let count = positive.len() as f64;
    let mean_t = positive.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = positive.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = positive.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sxy: f64 = positive
        .iter()
        .map(|p| (p.0 - mean_t) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let rho = slope.exp();
    let m_fit = intercept.exp();
    let inflation = points
        .iter()
        .filter(|&&(_, k)| k > 0.0)
        .map(|&(t, k)| k / (m_fit * rho.powi(t as i32)))
        .fold(1.0, f64::max);
    Ok(GeometricFit {
        m: m_fit * inflation,
        rho,
        inflation,
        points: positive.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    /// `kappa[tau - 1] = kappa(tau)`.
    pub kappa: Vec<f64>,
    pub fit: GeometricFit,
}

#[derive(Serialize)]
struct ProfileDocument<'a> {
    kappa: Vec<KappaPoint>,
    fitted_m: f64,
    fitted_rho: f64,
    inflation: f64,
    #[serde(skip)]
    _p: std::marker::PhantomData<&'a ()>,
}

#[derive(Serialize)]
struct KappaPoint {
    tau: usize,
    kappa: f64,
}

impl MixingProfile {
    pub fn kappa_at(&self, tau: usize) -> Option<f64> {
        tau.checked_sub(1).and_then(|i| self.kappa.get(i)).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ProfileDocument {
            kappa: self
                .kappa
                .iter()
                .enumerate()
                .map(|(i, &kappa)| KappaPoint { tau: i + 1, kappa })
                .collect(),
            fitted_m: self.fit.m,
            fitted_rho: self.fit.rho,
            inflation: self.fit.inflation,
            _p: std::marker::PhantomData,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["tau", "kappa"])?;
        for (i, k) in self.kappa.iter().enumerate() {
            w.write_record([(i + 1).to_string(), k.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_json()?.as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// `tau_epsilon / log(1 / epsilon)`, the empirical logarithmic-scaling constant.
pub fn log_scaling_constant(tau: usize, epsilon: f64) -> f64 {
    tau as f64 / (1.0 / epsilon).ln()
}

/// Monte Carlo estimate of `E[g(theta, o_k) | s_{k-tau} = u]` from
/// independent chain restarts; returns the mean and per-component standard error.
pub fn monte_carlo_conditional_direction(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    theta: &DVector<f64>,
    u: usize,
    tau: usize,
    restarts: usize,
    seed_value: u64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if tau == 0 || restarts < 2 {
        return Err(Error::OutOfRange("need tau >= 1 and at least 2 restarts".into()));
    }
    let m = phi.m();
    let mut rng = seed::stream(seed_value);
    let mut sum = DVector::zeros(m);
    let mut sum_sq = DVector::zeros(m);
    for _ in 0..restarts {
        let mut s = u;
        for _ in 0..tau {
            s = mrp.kernel().sample_next(s, &mut rng);
        }
        let obs = mrp.sample_step(s, &mut rng);
        let g = td_direction(phi, mrp.gamma(), theta, &obs)?.vector;
        sum_sq += g.component_mul(&g);
        sum += g;
    }
    let r = restarts as f64;
    let mean = &sum / r;
    let var = (sum_sq / r - mean.component_mul(&mean)) * (r / (r - 1.0));
    let se = var.map(|v| (v.max(0.0) / r).sqrt());
    Ok((mean, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_orthonormal_features;
    use crate::instance::{rank_one, two_state};
    use crate::mrp::generate_ergodic_mrp;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, scale: f64, rng: &mut seed::Stream) -> DVector<f64> {
        DVector::from_fn(m, |_, _| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            scale * z
        })
    }

    #[test]
    fn rank_one_mixes_immediately() {
        let mrp = rank_one(&[0.2, 0.5, 0.3], 0.6).unwrap();
        let phi = FeatureMatrix::identity(3);
        let an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        let theta = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        for tau in 1..5 {
            assert!(an.mixing_coefficient(tau).unwrap() < 1e-15);
            for u in 0..3 {
                assert!(an.mu_coefficient(&theta, u, tau).unwrap() < 1e-15);
            }
        }
    }

    #[test]
    fn tau_one_matches_enumeration() {
        let (mrp, phi) = two_state();
        let an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        let theta = DVector::from_vec(vec![0.7, -1.2]);
        for u in 0..2 {
            let exact = an.conditional_expected_direction(&theta, u, 1).unwrap();
            let mut brute = DVector::zeros(2);
            for (s, &p_s) in mrp.kernel().row(u).iter().enumerate() {
                for (s_next, &p) in mrp.kernel().row(s).iter().enumerate() {
                    let o = crate::mrp::Observation {
                        state: s,
                        reward: mrp.rewards()[s],
                        next_state: s_next,
                    };
                    brute += td_direction(&phi, mrp.gamma(), &theta, &o).unwrap().vector * (p_s * p);
                }
            }
            assert!((exact - brute).amax() < 1e-15);
        }
    }

    #[test]
    fn two_state_decay() {
        let (mrp, phi) = two_state();
        let mut an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        let theta = DVector::from_vec(vec![3.0, 1.0]);
        let steady = steady_state_direction(&mrp, &phi, an.stationary(), &theta).unwrap();
        let far = an.conditional_expected_direction(&theta, 0, 40).unwrap();
        assert!((far - steady).norm() <= 1e-6);

        let profile = an.profile(30).unwrap();
        for tau in 5..30 {
            let ratio = profile.kappa_at(tau + 1).unwrap() / profile.kappa_at(tau).unwrap();
            assert!((ratio - 0.7).abs() < 1e-9);
        }
        assert!((profile.fit.rho - 0.7).abs() < 0.02);

        let mut prev = f64::INFINITY;
        for tau in 1..30 {
            let mu = an.mu_coefficient(&theta, 1, tau).unwrap();
            assert!(mu <= prev + 1e-15);
            assert!(mu <= profile.kappa_at(tau).unwrap() * (1.0 + theta.norm()) + 1e-12);
            prev = mu;
        }
    }

    #[test]
    fn two_state_mixing_time_scan() {
        let (mrp, phi) = two_state();
        let an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        let eps = 0.05f64.powi(2);
        let tau = an.mixing_time(eps, DEFAULT_SCAN_CAP).unwrap();
        assert!(an.mixing_coefficient(tau).unwrap() <= eps);
        assert!(an.mixing_coefficient(tau - 1).unwrap() > eps);
        for e in [0.1, 0.01, 1e-4, 1e-8] {
            let a = an.mixing_time(e, DEFAULT_SCAN_CAP).unwrap();
            let b = an.mixing_time(e / 0.7, DEFAULT_SCAN_CAP).unwrap();
            assert!(b <= a && a <= b + 1, "{a} {b}");
        }
    }

    #[test]
    fn uniform_kernel_and_rank_one_time() {
        let n = 4;
        let q = vec![0.25; n];
        let mrp = rank_one(&q, 0.5).unwrap();
        let phi = FeatureMatrix::identity(n);
        let an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        assert!(an.mixing_coefficient(1).unwrap() < 1e-15);
        for eps in [0.5, 1e-3, 1e-12] {
            assert_eq!(an.mixing_time(eps, 10).unwrap(), 1);
        }
    }

    #[test]
    fn cap_exceeded() {
        let (mrp, phi) = two_state();
        let an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        assert!(matches!(
            an.mixing_time(1e-12, 5),
            Err(Error::MixingCapExceeded { cap: 5, .. })
        ));
    }

    #[test]
    fn exact_geometric_fit() {
        let points: Vec<(usize, f64)> = (1..20).map(|t| (t, 3.0 * 0.5f64.powi(t as i32))).collect();
        let fit = fit_geometric(&points).unwrap();
        assert!((fit.m - 3.0).abs() < 1e-10);
        assert!((fit.rho - 0.5).abs() < 1e-10);
        let zeros: Vec<(usize, f64)> = (1..5).map(|t| (t, 0.0)).collect();
        assert!(fit_geometric(&zeros).unwrap().is_degenerate());
        assert!(fit_geometric(&[(1, 1.0), (2, 0.5)]).is_err());
    }

    #[test]
    fn kappa_is_sound_for_random_theta() {
        let mrp = generate_ergodic_mrp(25, 0.8, 1.0, 0.1, 4).unwrap();
        let phi = build_orthonormal_features(25, 5, 4).unwrap();
        let mut an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        an.precompute(6);
        let mut rng = seed::stream(8);
        for tau in 1..=6 {
            let kappa = an.mixing_coefficient(tau).unwrap();
            for _ in 0..40 {
                let theta = gaussian(5, 10f64.powi((tau % 3) as i32), &mut rng);
                for u in 0..25 {
                    let mu = an.mu_coefficient(&theta, u, tau).unwrap();
                    assert!(mu <= kappa * (1.0 + theta.norm()) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let (mrp, phi) = two_state();
        let an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        let theta = DVector::from_vec(vec![0.5, 2.0]);
        for (u, tau) in [(0, 1), (1, 3), (0, 6)] {
            let exact = an.conditional_expected_direction(&theta, u, tau).unwrap();
            let (mean, se) =
                monte_carlo_conditional_direction(&mrp, &phi, &theta, u, tau, 100_000, 99).unwrap();
            for i in 0..2 {
                assert!((mean[i] - exact[i]).abs() <= 3.0 * se[i] + 1e-15);
            }
        }
    }

    #[test]
    fn profile_exports() {
        let (mrp, phi) = two_state();
        let mut an = MixingAnalyzer::new(&mrp, &phi).unwrap();
        let profile = an.profile(10).unwrap();
        let v: serde_json::Value = serde_json::from_str(&profile.to_json().unwrap()).unwrap();
        assert_eq!(v["kappa"].as_array().unwrap().len(), 10);
        assert!(v.get("fitted_rho").is_some());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kappa.csv");
        profile.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("tau,kappa\n1,"));
    }
}
