//! Tail ball against the number of agents, and its log-log slope.

use asyncmatd::engine::DelayModel;
use asyncmatd::harness::{cmd_sweep, AnalysisOptions, ExperimentConfig, RunGrid};
use asyncmatd::instance::{FeatureMode, InstanceSpec};
use asyncmatd::Result;

fn main() -> Result<()> {
    let config = ExperimentConfig {
        instance: InstanceSpec::Random {
            n: 20,
            m: 5,
            gamma: 0.5,
            reward_bound: 1.0,
            smoothing: 0.1,
            features: FeatureMode::Orthonormal,
            seed: 11,
        },
        grid: RunGrid {
            n_agents: vec![1, 2, 4, 8, 16],
            delays: vec![DelayModel::none(), DelayModel::uniform(0, 20)?],
            alpha: 0.01,
            iterations: 20_000,
            replications: 20,
            seed: 5,
            theta0: None,
        },
        analysis: AnalysisOptions::default(),
    };
    let report = cmd_sweep(&config, None)?;
    for c in &report.cells {
        println!("{:<28} ball = {:.4e} +- {:.1e}", c.label, c.ball.mean, c.ball.standard_error);
    }
    for fit in &report.scaling {
        println!("{}: slope {:.3}, speedups {:?}", fit.delay, fit.slope, fit.speedup.iter().map(|s| (s * 100.0).round() / 100.0).collect::<Vec<_>>());
    }
    Ok(())
}
