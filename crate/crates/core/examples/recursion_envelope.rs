//! A delayed linear recursion and the geometric envelope that dominates it.

use asyncmatd::bounds::{recursion_envelope, simulate_recursion, RecursionSpec};
use asyncmatd::{seed, Result};
use rand::Rng;

fn main() -> Result<()> {
    let spec = RecursionSpec {
        p: 0.6,
        q: 0.3,
        beta: 0.05,
        d_max: 10,
    };
    let env = recursion_envelope(&spec, 20.0)?;
    println!("rho = {:.6}, epsilon = {:.6}", env.rho, env.epsilon);

    let mut rng = seed::stream(1);
    let delays: Vec<usize> = (0..400).map(|_| rng.random_range(0..=spec.d_max)).collect();
    // A unit shrink runs the recursion at equality, the worst admissible case.
    let v = simulate_recursion(&spec, 20.0, &delays, |_| 1.0)?;
    for k in [0, 10, 50, 100, 200, 400] {
        println!("k = {k:>3}  V_k = {:.6}  envelope = {:.6}", v[k], env.at(k));
    }
    Ok(())
}
