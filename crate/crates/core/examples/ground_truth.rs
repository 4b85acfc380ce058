//! Fixed point, stationary distribution and conditioning of two instances.

use asyncmatd::ground_truth::{exact_value, steady_state_direction};
use asyncmatd::instance::{two_state, FeatureMode, InstanceSpec};
use asyncmatd::{GroundTruth, Result};
use nalgebra::DVector;

fn main() -> Result<()> {
    let (mrp, phi) = two_state();
    let gt = GroundTruth::compute(&mrp, &phi, &DVector::zeros(2))?;
    println!("two-state chain");
    println!("  pi      = {:?}", gt.pi.as_vector().as_slice());
    println!("  theta*  = {:?}", gt.theta_star.as_slice());
    println!("  omega   = {:.6}", gt.omega);
    println!("  sigma   = {:.6}", gt.sigma_const);
    let root = steady_state_direction(&mrp, &phi, &gt.pi, &gt.theta_star)?;
    println!("  |g_bar(theta*)| = {:.1e}", root.norm());

    // Linear features: theta* is the projected fixed point, not the true value.
    let inst = InstanceSpec::Random {
        n: 50,
        m: 4,
        gamma: 0.9,
        reward_bound: 1.0,
        smoothing: 0.1,
        features: FeatureMode::Orthonormal,
        seed: 3,
    }
    .build()?;
    let gt = GroundTruth::compute(&inst.mrp, &inst.phi, &DVector::zeros(4))?;
    let v = exact_value(&inst.mrp)?;
    let approx = inst.phi.approximate_value(&gt.theta_star)?;
    let weighted_err: f64 = (0..v.len())
        .map(|s| gt.pi.get(s) * (v[s] - approx[s]).powi(2))
        .sum::<f64>()
        .sqrt();
    println!("random chain n=50 m=4 gamma=0.9");
    println!("  omega = {:.4e}, sigma = {:.4}", gt.omega, gt.sigma_const);
    println!("  |V - Phi theta*|_D = {weighted_err:.4} (|V|_inf = {:.3})", v.amax());
    Ok(())
}
