//! One replicated ensemble of the asynchronous scheme with bounded random delays.

use asyncmatd::bounds::empirical_ball;
use asyncmatd::engine::lemmas::mean_delta_sq;
use asyncmatd::engine::{run_ensemble, DelayModel, RunParams};
use asyncmatd::instance::{FeatureMode, InstanceSpec};
use asyncmatd::{GroundTruth, Result};
use nalgebra::DVector;

fn main() -> Result<()> {
    let inst = InstanceSpec::Random {
        n: 20,
        m: 5,
        gamma: 0.5,
        reward_bound: 1.0,
        smoothing: 0.1,
        features: FeatureMode::Orthonormal,
        seed: 11,
    }
    .build()?;
    let gt = GroundTruth::compute(&inst.mrp, &inst.phi, &DVector::zeros(5))?;

    let params = RunParams::new(8, 10_000, 0.05, DelayModel::uniform(1, 50)?);
    let records = run_ensemble(&inst, &gt.theta_star, &params, 42, 0, 10)?;
    let mean = mean_delta_sq(&records)?;
    for k in [0, 10, 100, 1000, 5000, 10_000] {
        println!("k = {k:>6}  E|theta_k - theta*|^2 = {:.4e}", mean[k]);
    }
    let ball = empirical_ball(&records, 0.5)?;
    println!(
        "tail ball over the last {} steps: {:.4e} +- {:.1e} ({} runs)",
        ball.window, ball.mean, ball.standard_error, ball.replications
    );
    Ok(())
}
