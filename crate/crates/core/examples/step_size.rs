//! Step-size rule, its minimum horizon, and the finite-time bound it yields.

use asyncmatd::bounds::{minimum_horizon, step_size_schedule, theorem_bound, BoundConstants, BoundInputs};
use asyncmatd::instance::two_state;
use asyncmatd::mixing::{MixingAnalyzer, DEFAULT_SCAN_CAP};
use asyncmatd::{GroundTruth, Result};
use nalgebra::DVector;

fn main() -> Result<()> {
    let (mrp, phi) = two_state();
    let gt = GroundTruth::compute(&mrp, &phi, &DVector::zeros(2))?;
    let an = MixingAnalyzer::new(&mrp, &phi)?;
    let c = BoundConstants::default();
    let tau_max = 5;

    for n_agents in [1, 4, 16] {
        // tau depends on alpha through epsilon = alpha^2 and alpha on tau
        // through tau_bar = tau + tau_max; the mixing time only grows as
        // alpha shrinks, so the fixed point is reached from below.
        let mut tau = 1;
        let (t, rule) = loop {
            let tau_bar = (tau + tau_max) as f64;
            let t = 4 * minimum_horizon(c.c0, tau_bar, gt.omega, mrp.gamma(), n_agents);
            let rule = step_size_schedule(&c, tau_bar, gt.omega, mrp.gamma(), n_agents, t)?;
            let next = an.mixing_time(rule.alpha * rule.alpha, DEFAULT_SCAN_CAP)?;
            if next <= tau {
                break (t, rule);
            }
            tau = next;
        };
        let inputs = BoundInputs {
            alpha: rule.alpha,
            omega: gt.omega,
            gamma: mrp.gamma(),
            tau,
            tau_max,
            sigma: gt.sigma_const,
            n_agents,
            iterations: t as usize,
        };
        let bound = theorem_bound(&c, &inputs)?;
        println!(
            "N = {n_agents:>2}: tau = {tau}, T = {t}, alpha = {:.3e}, bound = {bound:.4e}, rate = {:.3e}",
            rule.alpha, rule.rate
        );
    }
    Ok(())
}
