//! Tail ball against the delay bound at a fixed number of agents.

use asyncmatd::harness::{cmd_sweep, ExperimentConfig};
use asyncmatd::Result;

fn main() -> Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/delay_sweep.json");
    let config = ExperimentConfig::load(path.as_ref())?;
    let report = cmd_sweep(&config, None)?;
    for c in &report.cells {
        println!("{:<28} tau_max = {:>3}  ball = {:.4e} +- {:.1e}", c.label, c.tau_max, c.ball.mean, c.ball.standard_error);
    }
    for o in &report.delay_ordering {
        println!(
            "N = {}: nondecreasing = {}, largest vs smallest delay = {:.1} standard errors",
            o.n_agents, o.nondecreasing, o.gap_in_stderr
        );
    }
    Ok(())
}
