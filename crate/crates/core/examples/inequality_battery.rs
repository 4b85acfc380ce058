//! The full property battery on a configuration; exits nonzero on failure.

use std::process::ExitCode;

use asyncmatd::harness::{cmd_verify, ExperimentConfig};

fn main() -> ExitCode {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/two_state.json").into());
    let report = ExperimentConfig::load(path.as_ref()).and_then(|c| cmd_verify(&c, None));
    match report {
        Ok(r) => {
            for v in &r.properties {
                println!("{} {:<30} {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            if r.passed { ExitCode::SUCCESS } else { ExitCode::FAILURE }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
