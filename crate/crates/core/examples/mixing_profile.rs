//! Mixing coefficient of the TD direction against the lag, its geometric
//! fit, and mixing times at a few tolerances.

use asyncmatd::instance::{rank_one, two_state};
use asyncmatd::mixing::{MixingAnalyzer, DEFAULT_SCAN_CAP};
use asyncmatd::{FeatureMatrix, Result};

fn main() -> Result<()> {
    let (mrp, phi) = two_state();
    let mut an = MixingAnalyzer::new(&mrp, &phi)?;
    let profile = an.profile(20)?;
    for tau in [1, 2, 5, 10, 20] {
        println!("kappa({tau:>2}) = {:.6e}", profile.kappa_at(tau).unwrap());
    }
    println!(
        "fit: kappa(tau) <= {:.4} * {:.4}^tau (inflation {:.3})",
        profile.fit.m, profile.fit.rho, profile.fit.inflation
    );
    for eps in [1e-2, 1e-4, 1e-8] {
        println!("tau_eps({eps:e}) = {}", an.mixing_time(eps, DEFAULT_SCAN_CAP)?);
    }

    // Rows all equal: one step forgets the start state.
    let r1 = rank_one(&[0.1, 0.2, 0.3, 0.4], 0.7)?;
    let id = FeatureMatrix::identity(4);
    let an = MixingAnalyzer::new(&r1, &id)?;
    println!("rank-1 chain: kappa(1) = {:.1e}, tau_eps(1e-12) = {}", an.mixing_coefficient(1)?, an.mixing_time(1e-12, DEFAULT_SCAN_CAP)?);
    Ok(())
}
