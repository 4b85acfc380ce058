use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{prepare, write_json, ExperimentConfig, Prepared};
use crate::bounds::{
    check_hypotheses, compare_with_bound, empirical_ball, recursion_envelope,
    simulate_recursion, BoundInputs, RecursionSpec,
};
use crate::engine::lemmas::{check_drift_bound, check_vk_second_moment, EnsembleConstants};
use crate::engine::{run, run_ensemble, RunParams};
use crate::error::Result;
use crate::ground_truth::{check_monotonicity, steady_state_direction};
use crate::mixing::{monte_carlo_conditional_direction, MixingAnalyzer, DEFAULT_SCAN_CAP};
use crate::mrp::Observation;
use crate::seed::{self, Stream};
use crate::td::{check_lipschitz, check_norm_bound};

const SAMPLES: usize = 1000;
/// Per-component tolerance of the Monte Carlo comparison, in standard errors.
const MC_SIGMAS: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub properties: Vec<Verdict>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.properties.iter().filter(|v| !v.passed)
    }
}

fn verdict(name: &str, passed: bool, detail: serde_json::Value) -> Verdict {
    Verdict {
        name: name.into(),
        passed,
        detail,
    }
}

fn random_theta(m: usize, scale: f64, rng: &mut Stream) -> DVector<f64> {
    let spread = 10f64.powf(rng.random_range(-2.0..1.0));
    DVector::from_fn(m, |_, _| {
        let z: f64 = StandardNormal.sample(&mut *rng);
        scale * spread * z
    })
}

fn random_observation(prep: &Prepared, rng: &mut Stream) -> Observation {
    let mrp = &prep.instance.mrp;
    let s = rng.random_range(0..mrp.n());
    mrp.sample_step(s, rng)
}

/// Largest step size `alpha <= alpha_0` that satisfies the step-size cap with
/// the mixing time recomputed at `alpha^q`.
fn admissible_alpha(
    config: &ExperimentConfig,
    analyzer: &MixingAnalyzer<'_>,
    omega: f64,
    gamma: f64,
    tau_max: usize,
) -> Result<(f64, usize)> {
    let q = config.analysis.q as i32;
    let c0 = config.analysis.constants.c0;
    let mut alpha = config.grid.alpha.min(1.0);
    if alpha <= 0.0 {
        alpha = 0.1;
    }
    for _ in 0..64 {
        let tau = analyzer.mixing_time(alpha.powi(q), DEFAULT_SCAN_CAP)?;
        let cap = omega * (1.0 - gamma) / (c0 * (tau + tau_max) as f64);
        if alpha <= cap {
            return Ok((alpha, tau));
        }
        alpha = cap;
    }
    let tau = analyzer.mixing_time(alpha.powi(q), DEFAULT_SCAN_CAP)?;
    Ok((alpha, tau))
}

/// Runs the property battery on the configured instance. Each property
/// yields a verdict; the report passes only if all do. Writes `verify.json`.
pub fn cmd_verify(config: &ExperimentConfig, out: Option<&Path>) -> Result<VerifyReport> {
    let prep = prepare(config)?;
    let mrp = &prep.instance.mrp;
    let phi = &prep.instance.phi;
    let gt = &prep.ground_truth;
    let m = phi.m();
    let gamma = mrp.gamma();
    let sigma = gt.sigma_const;
    let mut rng = seed::stream(seed::derive(config.grid.seed, 0x7e51));
    let mut out_v = Vec::new();

    let residual = gt.pi.residual(mrp.kernel());
    out_v.push(verdict(
        "stationary_distribution",
        residual <= 1e-10,
        json!({ "residual": residual }),
    ));

    let root = steady_state_direction(mrp, phi, &gt.pi, &gt.theta_star)?.amax();
    let scale = 1.0 + gt.theta_star.norm();
    out_v.push(verdict(
        "fixed_point_root",
        root <= 1e-10 * scale,
        json!({ "max_abs_direction": root, "scale": scale }),
    ));

    let thetas: Vec<DVector<f64>> = (0..SAMPLES).map(|_| random_theta(m, sigma, &mut rng)).collect();
    let mono = check_monotonicity(mrp, phi, gt, &thetas)?;
    out_v.push(verdict("strong_monotonicity", mono.holds(), serde_json::to_value(&mono)?));

    let samples: Vec<(DVector<f64>, Observation)> = thetas
        .iter()
        .map(|t| (t.clone(), random_observation(&prep, &mut rng)))
        .collect();
    let norm = check_norm_bound(phi, gamma, mrp.reward_bound(), &samples)?;
    out_v.push(verdict("direction_norm_bounds", norm.holds(), serde_json::to_value(&norm)?));

    let pairs: Vec<_> = thetas
        .iter()
        .map(|a| {
            let b = random_theta(m, sigma, &mut rng);
            (a.clone(), b, random_observation(&prep, &mut rng))
        })
        .collect();
    let lip = check_lipschitz(phi, gamma, &pairs, Some((mrp, &gt.pi)))?;
    out_v.push(verdict("lipschitz", lip.holds(), serde_json::to_value(&lip)?));

    let mut analyzer = MixingAnalyzer::new(mrp, phi)?;
    let probe_tau = prep.tau_epsilon.unwrap_or(1).clamp(1, 20);
    analyzer.precompute(probe_tau.max(60));
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    for tau in 1..=probe_tau {
        let kappa = analyzer.mixing_coefficient(tau)?;
        for theta in thetas.iter().take(50) {
            for u in 0..mrp.n() {
                let mu = analyzer.mu_coefficient(theta, u, tau)?;
                let rhs = kappa * (1.0 + theta.norm());
                if rhs > 0.0 {
                    worst = worst.max(mu / rhs);
                }
                if mu > rhs + 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    out_v.push(verdict(
        "mixing_coefficient_soundness",
        violations == 0,
        json!({ "max_taus": probe_tau, "max_ratio": worst, "violations": violations }),
    ));

    let mut mc_detail = Vec::new();
    let mut mc_ok = true;
    for (i, (u, tau)) in [(0, 1), (mrp.n() - 1, probe_tau.min(5))].into_iter().enumerate() {
        let theta = &gt.theta_star + random_theta(m, 1.0, &mut rng);
        let exact = analyzer.conditional_expected_direction(&theta, u, tau)?;
        let (mean, se) = monte_carlo_conditional_direction(
            mrp,
            phi,
            &theta,
            u,
            tau,
            20_000,
            seed::derive(config.grid.seed, 0x3c + i as u64),
        )?;
        let z = (0..m)
            .map(|j| (mean[j] - exact[j]).abs() / se[j].max(1e-300))
            .filter(|z| z.is_finite())
            .fold(0.0, f64::max);
        let exact_match = (0..m).all(|j| se[j] > 0.0 || (mean[j] - exact[j]).abs() <= 1e-12);
        mc_ok &= exact_match && z <= MC_SIGMAS;
        mc_detail.push(json!({ "anchor": u, "tau": tau, "max_z": z }));
    }
    out_v.push(verdict(
        "mixing_monte_carlo",
        mc_ok,
        json!({ "restarts": 20_000, "tolerance_sigmas": MC_SIGMAS, "checks": mc_detail }),
    ));

    let profile = analyzer.profile(60)?;
    let fit_ok = profile.fit.is_degenerate() || (profile.fit.rho > 0.0 && profile.fit.rho < 1.0);
    out_v.push(verdict("geometric_mixing_fit", fit_ok, serde_json::to_value(profile.fit)?));

    let cell = config.cells()[0].clone();
    let tau_max = cell.delay.tau_max;
    let alpha = config.grid.alpha;
    let iterations = config.grid.iterations.clamp(400, 2000);
    let mut params = config.params(&cell);
    params.iterations = iterations;
    params.record_full_theta = true;

    match prep.tau_epsilon {
        Some(tau) => {
            let rec = run(&prep.instance, &gt.theta_star, &params, seed::derive(config.grid.seed, 0x12))?;
            let traj = rec.theta_trajectory.as_ref().expect("recorded");
            let stride = (traj.len() / 50).max(1);
            let report = analyzer.check_mixing_bound(
                traj.iter().step_by(stride).map(Vec::as_slice),
                tau,
                config.epsilon(),
            )?;
            out_v.push(verdict(
                "mixing_along_trajectory",
                report.violations == 0,
                serde_json::to_value(&report)?,
            ));
        }
        None => out_v.push(verdict(
            "mixing_along_trajectory",
            true,
            json!({ "skipped": "alpha = 0 gives precision 0" }),
        )),
    }

    let reps = config.grid.replications.clamp(2, 10);
    let records = run_ensemble(&prep.instance, &gt.theta_star, &params, config.grid.seed, cell.seed_key(), reps)?;
    let constants = EnsembleConstants {
        alpha,
        sigma,
        q: config.analysis.q,
        tau: prep.tau_epsilon.unwrap_or(1),
        tau_max,
        n_agents: cell.n_agents,
    };
    let vk = check_vk_second_moment(&records, &constants, 25)?;
    out_v.push(verdict("direction_second_moment", vk.holds(), json!({ "margin": vk.margin, "max_ratio": vk.max_ratio, "points": vk.points.len() })));
    let drift = check_drift_bound(&records, &constants, &[1, 2, 5, 10], 10)?;
    out_v.push(verdict("iterate_drift", drift.holds(), json!({ "margin": drift.margin, "max_ratio": drift.max_ratio, "points": drift.points.len() })));

    let (safe_alpha, tau) = admissible_alpha(config, &analyzer, gt.omega, gamma, tau_max)?;
    let mut safe = RunParams::new(cell.n_agents, config.grid.iterations.max(400), safe_alpha, cell.delay.clone());
    safe.theta0 = config.grid.theta0.clone();
    let safe_records = run_ensemble(&prep.instance, &gt.theta_star, &safe, config.grid.seed, cell.seed_key(), reps)?;
    let ball = empirical_ball(&safe_records, config.analysis.tail_fraction.max(0.25))?;
    let inputs = BoundInputs {
        alpha: safe_alpha,
        omega: gt.omega,
        gamma,
        tau,
        tau_max,
        sigma,
        n_agents: cell.n_agents,
        iterations: safe.iterations,
    };
    let hyp = check_hypotheses(&config.analysis.constants, &inputs);
    let bound = compare_with_bound(&config.analysis.constants, &inputs, &ball)?;
    let max_d = safe_records.iter().flat_map(|r| r.delta_sq.iter().copied()).fold(0.0, f64::max);
    let bounded = max_d <= 1e3 * sigma * sigma;
    let covered = bound.inflation_factor.is_some_and(|f| f <= 10.0);
    out_v.push(verdict(
        "finite_time_bound",
        hyp.hold() && covered && bounded,
        json!({ "report": bound, "max_delta_sq": max_d, "divergence_limit": 1e3 * sigma * sigma }),
    ));

    let mut env_fail = 0usize;
    for _ in 0..100 {
        let p = rng.random_range(0.0..0.95);
        let q = rng.random_range(0.0..(0.99 - p));
        let spec = RecursionSpec {
            p,
            q,
            beta: rng.random_range(0.0..1.0),
            d_max: rng.random_range(0..10),
        };
        let v0 = rng.random_range(0.0..10.0);
        let env = recursion_envelope(&spec, v0)?;
        let delays: Vec<usize> = (0..1000).map(|_| rng.random_range(0..=spec.d_max)).collect();
        let v = simulate_recursion(&spec, v0, &delays, |_| 1.0)?;
        env_fail += v.iter().enumerate().filter(|(k, vk)| **vk > env.at(*k) + 1e-12).count();
    }
    out_v.push(verdict("recursion_envelope", env_fail == 0, json!({ "specs": 100, "violations": env_fail })));

    let report = VerifyReport {
        passed: out_v.iter().all(|v| v.passed),
        properties: out_v,
    };
    if let Some(dir) = out {
        write_json(&dir.join("verify.json"), &report)?;
    }
    Ok(report)
}
