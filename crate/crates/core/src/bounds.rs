//! The finite-time bound, the step-size rule, and the delayed-recursion
//! envelope, evaluated as numbers.

use serde::{Deserialize, Serialize};

use crate::engine::RunRecord;
use crate::error::{Error, Result};

/// Constants of the finite-time bound. `c0` caps the step size, `c1..c3`
/// scale the transient, variance and bias terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c0: 112.0,
            c1: 6.0,
            c2: 352.0,
            c3: 15.0,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(c.is_finite() && c >= 1.0) {
                return Err(Error::Config(format!("{name} = {c} must be a finite number >= 1")));
            }
        }
        Ok(())
    }

    /// `c1..c3` multiplied by `factor`; the bound scales by the same factor.
    pub fn inflated(&self, factor: f64) -> Self {
        BoundConstants {
            c0: self.c0,
            c1: self.c1 * factor,
            c2: self.c2 * factor,
            c3: self.c3 * factor,
        }
    }
}

/// Problem quantities the bound depends on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub alpha: f64,
    pub omega: f64,
    pub gamma: f64,
    /// Mixing time at precision `alpha^q`.
    pub tau: usize,
    pub tau_max: usize,
    pub sigma: f64,
    pub n_agents: usize,
    pub iterations: usize,
}

impl BoundInputs {
    fn effective_delay(&self) -> f64 {
        (self.tau + self.tau_max) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub step_size_cap: f64,
    pub step_size_ok: bool,
    pub min_iterations: usize,
    pub iterations_ok: bool,
}

impl Hypotheses {
    pub fn hold(&self) -> bool {
        self.step_size_ok && self.iterations_ok
    }
}

pub fn check_hypotheses(c: &BoundConstants, x: &BoundInputs) -> Hypotheses {
    let step_size_cap = x.omega * (1.0 - x.gamma) / (c.c0 * x.effective_delay());
    let min_iterations = x.tau + 2 * x.tau_max;
    Hypotheses {
        step_size_cap,
        step_size_ok: x.alpha <= step_size_cap,
        min_iterations,
        iterations_ok: x.iterations >= min_iterations,
    }
}

fn check_inputs(x: &BoundInputs) -> Result<()> {
    if !(x.omega > 0.0) {
        return Err(Error::NonPositiveOmega(x.omega));
    }
    if !(x.gamma > 0.0 && x.gamma < 1.0) {
        return Err(Error::OutOfRange(format!("gamma = {} outside (0, 1)", x.gamma)));
    }
    if x.n_agents == 0 || x.tau + x.tau_max == 0 {
        return Err(Error::OutOfRange("need N >= 1 and tau + tau_max >= 1".into()));
    }
    if !(x.alpha >= 0.0 && x.sigma >= 0.0) {
        return Err(Error::OutOfRange("alpha and sigma must be nonnegative".into()));
    }
    Ok(())
}

/// Right-hand side of the bound without checking its hypotheses:
/// `exp(-alpha (1-gamma) omega T / (2 (tau + tau_max))) c1 sigma^2
///  + (tau + tau_max) sigma^2 / (omega (1-gamma)) (c2 alpha / N + c3 alpha^3)`.
pub fn evaluate_bound(c: &BoundConstants, x: &BoundInputs) -> Result<f64> {
    check_inputs(x)?;
    let eff = x.effective_delay();
    let contraction = x.alpha * (1.0 - x.gamma) * x.omega / (2.0 * eff);
    let sigma_sq = x.sigma * x.sigma;
    let transient = (-contraction * x.iterations as f64).exp() * c.c1 * sigma_sq;
    Ok(transient + steady_term(c, x))
}

/// The `T -> infinity` limit of the bound.
pub fn steady_term(c: &BoundConstants, x: &BoundInputs) -> f64 {
    let eff = x.effective_delay();
    eff * x.sigma * x.sigma / (x.omega * (1.0 - x.gamma))
        * (c.c2 * x.alpha / x.n_agents as f64 + c.c3 * x.alpha.powi(3))
}

/// The bound at `x`, refusing inputs outside its hypotheses.
pub fn theorem_bound(c: &BoundConstants, x: &BoundInputs) -> Result<f64> {
    c.validate()?;
    check_inputs(x)?;
    let h = check_hypotheses(c, x);
    let mut failed = Vec::new();
    if !h.step_size_ok {
        failed.push(format!("alpha = {} exceeds the cap {}", x.alpha, h.step_size_cap));
    }
    if !h.iterations_ok {
        failed.push(format!(
            "T = {} is below tau + 2 tau_max = {}",
            x.iterations, h.min_iterations
        ));
    }
    if !failed.is_empty() {
        return Err(Error::HypothesisViolated(failed.join("; ")));
    }
    evaluate_bound(c, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSize {
    pub alpha: f64,
    /// `tau_bar^2 log(NT) / (omega^2 (1-gamma)^2 N T)`, the rate per unit
    /// `sigma^2` with unit constant.
    pub rate: f64,
    /// Smallest horizon for which the rule applies.
    pub min_iterations: u64,
}

fn horizon_requirement(c0: f64, tau_bar: f64, omega: f64, gamma: f64, n: f64, t: f64) -> f64 {
    let g = omega * (1.0 - gamma);
    2.0 * c0 * n * tau_bar * tau_bar * (n * t).ln() / (g * g)
}

/// Smallest integer `T >= 1` with `T >= 2 c0 N tau_bar^2 log(NT) / (omega^2 (1-gamma)^2)`.
pub fn minimum_horizon(c0: f64, tau_bar: f64, omega: f64, gamma: f64, n_agents: usize) -> u64 {
    let n = n_agents as f64;
    let ok = |t: u64| t as f64 >= horizon_requirement(c0, tau_bar, omega, gamma, n, t as f64);
    // T - a log(NT) is increasing once T > a, so the feasible set is a ray.
    let a = 2.0 * c0 * n * tau_bar * tau_bar / (omega * (1.0 - gamma)).powi(2);
    let mut lo = (a.floor() as u64).max(1);
    if ok(lo) {
        return lo;
    }
    let mut hi = lo.saturating_mul(2);
    while !ok(hi) {
        lo = hi;
        hi = hi.saturating_mul(2);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `alpha = tau_bar log(NT) / (omega (1-gamma) T)` for a horizon `T` long
/// enough that the rule satisfies the step-size cap.
pub fn step_size_schedule(
    c: &BoundConstants,
    tau_bar: f64,
    omega: f64,
    gamma: f64,
    n_agents: usize,
    iterations: u64,
) -> Result<StepSize> {
    c.validate()?;
    if !(omega > 0.0) {
        return Err(Error::NonPositiveOmega(omega));
    }
    if !(gamma > 0.0 && gamma < 1.0) || !(tau_bar >= 1.0) || n_agents == 0 {
        return Err(Error::OutOfRange(
            "need gamma in (0, 1), tau_bar >= 1 and N >= 1".into(),
        ));
    }
    let required = minimum_horizon(c.c0, tau_bar, omega, gamma, n_agents);
    if iterations < required {
        return Err(Error::HorizonTooSmall {
            got: iterations,
            required,
        });
    }
    let t = iterations as f64;
    let nt = n_agents as f64 * t;
    let g = omega * (1.0 - gamma);
    Ok(StepSize {
        alpha: tau_bar * nt.ln() / (g * t),
        rate: tau_bar * tau_bar * nt.ln() / (g * g * nt),
        min_iterations: required,
    })
}

/// `V_{k+1} <= p V_k + q max_{(k-d(k))_+ <= l <= k} V_l + beta`, `d(k) <= d_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionSpec {
    pub p: f64,
    pub q: f64,
    pub beta: f64,
    pub d_max: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub rho: f64,
    pub epsilon: f64,
    pub v0: f64,
}

impl Envelope {
    /// `rho^k v0 + epsilon`.
    pub fn at(&self, k: usize) -> f64 {
        self.rho.powf(k as f64) * self.v0 + self.epsilon
    }
}

/// `rho = (p + q)^{1 / (1 + d_max)}`, `epsilon = beta / (1 - p - q)`.
pub fn recursion_envelope(spec: &RecursionSpec, v0: f64) -> Result<Envelope> {
    if !(spec.p >= 0.0 && spec.q >= 0.0 && spec.beta >= 0.0 && v0 >= 0.0) {
        return Err(Error::OutOfRange(
            "recursion coefficients and V_0 must be nonnegative".into(),
        ));
    }
    let s = spec.p + spec.q;
    if !(s < 1.0) {
        return Err(Error::ContractionViolated(s));
    }
    Ok(Envelope {
        rho: s.powf(1.0 / (1 + spec.d_max) as f64),
        epsilon: spec.beta / (1.0 - s),
        v0,
    })
}

/// Runs the recursion for `delays.len()` steps. `shrink(k)` in `[0, 1]`
/// scales step `k`'s right-hand side; 1 everywhere gives equality.
pub fn simulate_recursion(
    spec: &RecursionSpec,
    v0: f64,
    delays: &[usize],
    mut shrink: impl FnMut(usize) -> f64,
) -> Result<Vec<f64>> {
    if let Some(&d) = delays.iter().find(|&&d| d > spec.d_max) {
        return Err(Error::InvalidDelay(format!("d(k) = {d} exceeds d_max = {}", spec.d_max)));
    }
    let mut v = Vec::with_capacity(delays.len() + 1);
    v.push(v0);
    for (k, &d) in delays.iter().enumerate() {
        let lag_max = v[k.saturating_sub(d)..=k].iter().copied().fold(0.0, f64::max);
        let rhs = spec.p * v[k] + spec.q * lag_max + spec.beta;
        v.push(shrink(k).clamp(0.0, 1.0) * rhs);
    }
    Ok(v)
}

/// Tail-window estimate of the steady-state `E delta^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalBall {
    pub mean: f64,
    /// Across replications; zero for a single replication.
    pub standard_error: f64,
    pub replications: usize,
    pub window: usize,
}

pub const MIN_TAIL_WINDOW: usize = 100;

fn tail_window(len: usize, tail_fraction: f64) -> Result<usize> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::OutOfRange(format!("tail fraction {tail_fraction} outside (0, 1]")));
    }
    let window = ((len as f64) * tail_fraction).floor() as usize;
    if window < MIN_TAIL_WINDOW {
        return Err(Error::WindowTooShort {
            got: window,
            required: MIN_TAIL_WINDOW,
        });
    }
    Ok(window)
}

/// Running mean; exact when all values coincide.
fn running_mean(values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .fold(0.0, |m, (i, &x)| m + (x - m) / (i + 1) as f64)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = running_mean(values);
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, (var / r).sqrt())
}

/// Per-replication means of `delta_k^2` over `lo..hi`, combined.
pub fn window_ball(records: &[RunRecord], lo: usize, hi: usize) -> Result<EmpiricalBall> {
    if records.is_empty() {
        return Err(Error::MissingInput("empty ensemble".into()));
    }
    let len = records[0].delta_sq.len();
    if hi > len || lo >= hi || records.iter().any(|r| r.delta_sq.len() != len) {
        return Err(Error::OutOfRange(format!("window {lo}..{hi} of trajectories")));
    }
    let per_run: Vec<f64> = records
        .iter()
        .map(|r| running_mean(&r.delta_sq[lo..hi]))
        .collect();
    let (mean, standard_error) = mean_and_stderr(&per_run);
    Ok(EmpiricalBall {
        mean,
        standard_error,
        replications: records.len(),
        window: hi - lo,
    })
}

/// Mean `delta_k^2` over the last `tail_fraction` of the trajectory.
pub fn empirical_ball(records: &[RunRecord], tail_fraction: f64) -> Result<EmpiricalBall> {
    let len = records
        .first()
        .ok_or_else(|| Error::MissingInput("empty ensemble".into()))?
        .delta_sq
        .len();
    let window = tail_window(len, tail_fraction)?;
    window_ball(records, len - window, len)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub hypotheses: Hypotheses,
    /// `None` when the hypotheses fail.
    pub bound_value: Option<f64>,
    pub empirical_ball: f64,
    pub standard_error: f64,
    pub constants_used: BoundConstants,
    /// Smallest factor on `c1..c3` that makes the bound cover the ball.
    pub inflation_factor: Option<f64>,
}

impl BoundReport {
    pub fn covered(&self) -> bool {
        self.inflation_factor == Some(1.0)
    }
}

pub fn compare_with_bound(
    c: &BoundConstants,
    x: &BoundInputs,
    ball: &EmpiricalBall,
) -> Result<BoundReport> {
    c.validate()?;
    let hypotheses = check_hypotheses(c, x);
    let bound_value = if hypotheses.hold() {
        Some(evaluate_bound(c, x)?)
    } else {
        None
    };
    let inflation_factor = bound_value.map(|b| (ball.mean / b).max(1.0));
    Ok(BoundReport {
        hypotheses,
        bound_value,
        empirical_ball: ball.mean,
        standard_error: ball.standard_error,
        constants_used: *c,
        inflation_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_ensemble, DelayModel, RunParams};
    use crate::ground_truth::GroundTruth;
    use crate::instance::{two_state, Instance};
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn inputs() -> BoundInputs {
        BoundInputs {
            alpha: 1e-4,
            omega: 0.5,
            gamma: 0.5,
            tau: 5,
            tau_max: 5,
            sigma: 2.0,
            n_agents: 4,
            iterations: 10_000,
        }
    }

    #[test]
    fn defaults_are_valid() {
        let c = BoundConstants::default();
        c.validate().unwrap();
        assert_eq!((c.c0, c.c1, c.c2, c.c3), (112.0, 6.0, 352.0, 15.0));
        assert!(BoundConstants { c1: 0.5, ..c }.validate().is_err());
    }

    #[test]
    fn large_horizon_limit() {
        let c = BoundConstants::default();
        let mut x = inputs();
        x.iterations = usize::MAX / 2;
        let b = evaluate_bound(&c, &x).unwrap();
        let expected = 10.0 * 4.0 / (0.5 * 0.5) * (352.0 * 1e-4 / 4.0 + 15.0 * 1e-12);
        assert!((b - expected).abs() <= 1e-12 * expected);
        assert_eq!(b, steady_term(&c, &x));
    }

    #[test]
    fn doubling_agents_halves_steady_term() {
        let c = BoundConstants::default();
        let x = inputs();
        let x2 = BoundInputs { n_agents: 8, ..x };
        let (a, b) = (steady_term(&c, &x), steady_term(&c, &x2));
        let slack = 10.0 * 4.0 / 0.25 * 15.0 * 1e-12;
        assert!((b - a / 2.0).abs() <= slack);
    }

    #[test]
    fn cap_evaluation_is_finite() {
        let c = BoundConstants::default();
        let x = BoundInputs {
            alpha: 1.0 / (112.0 * 10.0),
            omega: 1.0,
            gamma: 0.5,
            tau: 5,
            tau_max: 5,
            sigma: 1.0,
            n_agents: 1,
            iterations: 30,
        };
        // omega (1 - gamma) = 1/2 here, so halve alpha to sit on the cap.
        let x = BoundInputs { alpha: x.alpha / 2.0, ..x };
        let b = theorem_bound(&c, &x).unwrap();
        assert!(b.is_finite() && b > 0.0);
    }

    #[test]
    fn hypothesis_errors_name_the_failure() {
        let c = BoundConstants::default();
        let x = BoundInputs { alpha: 0.1, ..inputs() };
        match theorem_bound(&c, &x) {
            Err(Error::HypothesisViolated(msg)) => assert!(msg.contains("alpha")),
            other => panic!("{other:?}"),
        }
        let x = BoundInputs { iterations: 10, ..inputs() };
        match theorem_bound(&c, &x) {
            Err(Error::HypothesisViolated(msg)) => assert!(msg.contains("T = 10")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn monotone_over_grids() {
        let c = BoundConstants::default();
        let base = inputs();
        for n in 1..20 {
            let a = evaluate_bound(&c, &BoundInputs { n_agents: n, ..base }).unwrap();
            let b = evaluate_bound(&c, &BoundInputs { n_agents: n + 1, ..base }).unwrap();
            assert!(b <= a);
        }
        for tm in 0..50 {
            let a = evaluate_bound(&c, &BoundInputs { tau_max: tm, ..base }).unwrap();
            let b = evaluate_bound(&c, &BoundInputs { tau_max: tm + 1, ..base }).unwrap();
            assert!(b >= a);
        }
        for i in 0..50 {
            let s = 0.1 * i as f64;
            let a = evaluate_bound(&c, &BoundInputs { sigma: s, ..base }).unwrap();
            let b = evaluate_bound(&c, &BoundInputs { sigma: s + 0.1, ..base }).unwrap();
            assert!(b >= a);
        }
    }

    #[test]
    fn schedule_shape() {
        let c = BoundConstants::default();
        let min = minimum_horizon(112.0, 2.0, 0.5, 0.5, 4);
        let req = |t: u64| horizon_requirement(112.0, 2.0, 0.5, 0.5, 4.0, t as f64);
        assert!(min as f64 >= req(min) && ((min - 1) as f64) < req(min - 1));
        match step_size_schedule(&c, 2.0, 0.5, 0.5, 4, min - 1) {
            Err(Error::HorizonTooSmall { required, .. }) => assert_eq!(required, min),
            other => panic!("{other:?}"),
        }
        let mut prev = f64::INFINITY;
        for t in [min, 2 * min, 4 * min, 8 * min] {
            let s = step_size_schedule(&c, 2.0, 0.5, 0.5, 4, t).unwrap();
            assert!(s.alpha < prev);
            prev = s.alpha;
            let expected = 2.0 * (4.0 * t as f64).ln() / (0.25 * t as f64);
            assert!((s.alpha - expected).abs() <= 1e-15 * expected);
        }
        let t = 100 * minimum_horizon(112.0, 2.0, 0.5, 0.5, 8);
        let a1 = step_size_schedule(&c, 2.0, 0.5, 0.5, 4, t).unwrap();
        let a2 = step_size_schedule(&c, 2.0, 0.5, 0.5, 8, t).unwrap();
        let ratio = (8.0 * t as f64).ln() / (4.0 * t as f64).ln();
        assert!((a2.alpha / a1.alpha - ratio).abs() < 1e-12);
        assert!(a2.alpha > a1.alpha);
        assert!((a2.rate / a1.rate - 0.5 * ratio).abs() < 1e-12);
    }

    #[test]
    fn schedule_respects_step_cap() {
        // At the minimum horizon the rule sits inside the cap with tau = tau_max = tau_bar / 2.
        let c = BoundConstants::default();
        let (tau_bar, omega, gamma, n) = (4.0, 0.3, 0.7, 3);
        let s = step_size_schedule(&c, tau_bar, omega, gamma, n, minimum_horizon(c.c0, tau_bar, omega, gamma, n)).unwrap();
        assert!(s.alpha <= omega * (1.0 - gamma) / (c.c0 * tau_bar) * 1.0 + 1e-15);
    }

    #[test]
    fn envelope_special_cases() {
        let spec = RecursionSpec { p: 0.5, q: 0.0, beta: 0.0, d_max: 0 };
        let env = recursion_envelope(&spec, 3.0).unwrap();
        for k in 0..20 {
            assert!((env.at(k) - 3.0 * 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
        let spec = RecursionSpec { p: 0.3, q: 0.2, beta: 0.4, d_max: 3 };
        let env = recursion_envelope(&spec, 10.0).unwrap();
        assert!((env.at(100_000) - 0.8).abs() < 1e-12);
        assert!((env.rho - 0.5f64.powf(0.25)).abs() < 1e-15);
        let bad = RecursionSpec { p: 0.6, q: 0.4, beta: 0.0, d_max: 1 };
        assert!(matches!(recursion_envelope(&bad, 1.0), Err(Error::ContractionViolated(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn envelope_dominates(
            p in 0.0f64..0.99,
            frac in 0.0f64..1.0,
            beta in 0.0f64..2.0,
            d_max in 0usize..12,
            v0 in 0.0f64..100.0,
            s in any::<u64>(),
        ) {
            let q = (0.999 - p) * frac;
            let spec = RecursionSpec { p, q, beta, d_max };
            let env = recursion_envelope(&spec, v0).unwrap();
            let mut rng = seed::stream(s);
            let delays: Vec<usize> = (0..2000).map(|_| rng.random_range(0..=d_max)).collect();
            let mut shrink_rng = seed::stream(s ^ 1);
            let v = simulate_recursion(&spec, v0, &delays, |_| {
                if shrink_rng.random_bool(0.7) { 1.0 } else { shrink_rng.random::<f64>() }
            }).unwrap();
            for (k, vk) in v.iter().enumerate() {
                prop_assert!(*vk <= env.at(k) + 1e-12, "k={} v={} env={}", k, vk, env.at(k));
            }
        }
    }

    fn ensemble(alpha: f64, iterations: usize, replications: usize) -> Vec<RunRecord> {
        let (mrp, phi) = two_state();
        let inst = Instance { mrp, phi };
        let params = RunParams::new(2, iterations, alpha, DelayModel::constant(2));
        let gt = GroundTruth::compute(&inst.mrp, &inst.phi, &params.theta_0(2)).unwrap();
        run_ensemble(&inst, &gt.theta_star, &params, 5, 0, replications).unwrap()
    }

    #[test]
    fn ball_of_frozen_run() {
        let recs = ensemble(0.0, 400, 3);
        let ball = empirical_ball(&recs, 0.5).unwrap();
        assert_eq!(ball.mean, recs[0].delta_sq[0]);
        assert_eq!(ball.standard_error, 0.0);
        assert!(matches!(empirical_ball(&recs, 0.1), Err(Error::WindowTooShort { .. })));
    }

    #[test]
    fn disjoint_tail_windows_agree() {
        let recs = ensemble(0.05, 20_000, 20);
        let a = window_ball(&recs, 10_000, 15_000).unwrap();
        let b = window_ball(&recs, 15_000, 20_001).unwrap();
        let se = (a.standard_error.powi(2) + b.standard_error.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() <= 3.0 * se, "{a:?} {b:?}");
    }

    #[test]
    fn stderr_from_per_run_means() {
        let recs = ensemble(0.05, 1000, 20);
        let ball = empirical_ball(&recs, 0.2).unwrap();
        let w = ball.window;
        let len = recs[0].delta_sq.len();
        let means: Vec<f64> = recs
            .iter()
            .map(|r| r.delta_sq[len - w..].iter().sum::<f64>() / w as f64)
            .collect();
        let m = means.iter().sum::<f64>() / 20.0;
        let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 19.0).sqrt();
        assert!((ball.mean - m).abs() < 1e-12 * m.max(1.0));
        assert!((ball.standard_error - sd / 20f64.sqrt()).abs() < 1e-12 * sd);
    }

    #[test]
    fn report_json_shape() {
        let c = BoundConstants::default();
        let ball = EmpiricalBall { mean: 0.01, standard_error: 0.001, replications: 5, window: 200 };
        let report = compare_with_bound(&c, &inputs(), &ball).unwrap();
        assert!(report.covered());
        let v = serde_json::to_value(&report).unwrap();
        for key in ["hypotheses", "bound_value", "empirical_ball", "standard_error", "constants_used", "inflation_factor"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let huge = EmpiricalBall { mean: 1e6, ..ball };
        let r = compare_with_bound(&c, &inputs(), &huge).unwrap();
        let f = r.inflation_factor.unwrap();
        let b = evaluate_bound(&c.inflated(f), &inputs()).unwrap();
        assert!((b - 1e6).abs() < 1e-6);
    }
}
