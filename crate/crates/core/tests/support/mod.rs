//! Reference implementations written independently of the library code
//! paths they are compared against.

#![allow(dead_code)]

use asyncmatd::seed::{self, Stream};
use asyncmatd::{FeatureMatrix, MarkovRewardProcess};
use rand::Rng;

/// Textbook single-agent TD(0) on the agent-0 stream of `run_seed`.
/// Returns `theta_k` for `k = 0..=iterations`.
pub fn reference_td0(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    theta0: &[f64],
    alpha: f64,
    iterations: usize,
    run_seed: u64,
    initial_state: usize,
) -> Vec<Vec<f64>> {
    let mut rng = seed::stream(seed::agent_seed(run_seed, 0));
    let gamma = mrp.gamma();
    let mut theta = theta0.to_vec();
    let mut s = initial_state;
    let mut out = vec![theta.clone()];
    for _ in 0..iterations {
        let s_next = draw_next(mrp, s, &mut rng);
        let r = mrp.rewards()[s];
        let v_s: f64 = phi.row(s).iter().zip(&theta).map(|(f, t)| f * t).sum();
        let v_next: f64 = phi.row(s_next).iter().zip(&theta).map(|(f, t)| f * t).sum();
        let delta = r + gamma * v_next - v_s;
        for j in 0..theta.len() {
            theta[j] += alpha * (delta * phi.row(s)[j]);
        }
        out.push(theta.clone());
        s = s_next;
    }
    out
}

/// Inverse-CDF draw from row `s`.
pub fn draw_next(mrp: &MarkovRewardProcess, s: usize, rng: &mut Stream) -> usize {
    let u: f64 = rng.random();
    let row = mrp.kernel().row(s);
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Brute-force delayed recursion at equality:
/// `V_{k+1} = p V_k + q max_{(k-d_k)_+ <= l <= k} V_l + beta`.
pub fn simulate_max_recursion(p: f64, q: f64, beta: f64, v0: f64, delays: &[usize]) -> Vec<f64> {
    let mut v = vec![v0];
    for (k, &d) in delays.iter().enumerate() {
        let lo = k.saturating_sub(d);
        let mut m = v[lo];
        for &x in &v[lo..=k] {
            if x > m {
                m = x;
            }
        }
        v.push(p * v[k] + q * m + beta);
    }
    v
}

/// Monte Carlo estimate of `E[g(theta, o_k) | s_{k-tau} = u]` by direct
/// simulation; returns per-component mean and standard error.
pub fn mc_conditional(
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    theta: &[f64],
    u: usize,
    tau: usize,
    restarts: usize,
    seed_value: u64,
) -> (Vec<f64>, Vec<f64>) {
    let m = phi.m();
    let mut rng = seed::stream(seed_value);
    let mut sum = vec![0.0; m];
    let mut sq = vec![0.0; m];
    for _ in 0..restarts {
        let mut s = u;
        for _ in 0..tau {
            s = draw_next(mrp, s, &mut rng);
        }
        let s_next = draw_next(mrp, s, &mut rng);
        let v_s: f64 = phi.row(s).iter().zip(theta).map(|(f, t)| f * t).sum();
        let v_n: f64 = phi.row(s_next).iter().zip(theta).map(|(f, t)| f * t).sum();
        let delta = mrp.rewards()[s] + mrp.gamma() * v_n - v_s;
        for j in 0..m {
            let g = delta * phi.row(s)[j];
            sum[j] += g;
            sq[j] += g * g;
        }
    }
    let r = restarts as f64;
    let mean: Vec<f64> = sum.iter().map(|x| x / r).collect();
    let se = (0..m)
        .map(|j| ((sq[j] / r - mean[j] * mean[j]).max(0.0) * r / (r - 1.0) / r).sqrt())
        .collect();
    (mean, se)
}

/// Mean over replications of the per-run mean of the last `window` values,
/// with the standard error of the per-run means.
pub fn tail_ball(runs: &[Vec<f64>], window: usize) -> (f64, f64) {
    let means: Vec<f64> = runs
        .iter()
        .map(|d| d[d.len() - window..].iter().sum::<f64>() / window as f64)
        .collect();
    let r = means.len() as f64;
    let mean = means.iter().sum::<f64>() / r;
    let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0).max(1.0);
    (mean, (var / r).sqrt())
}
