//! Hierarchical seed derivation.
//!
//! Every random stream in a run descends from one master seed through a
//! chain of labelled derivations, so streams never overlap and adding a
//! sibling never perturbs an existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stream in the crate.
pub type Stream = ChaCha8Rng;

const AGENT_TAG: u64 = 0x6167_656e_7473; // "agents"
const DELAY_TAG: u64 = 0x6465_6c61_79; // "delay"

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of child `label` under `parent`.
pub fn derive(parent: u64, label: u64) -> u64 {
    splitmix64(parent ^ splitmix64(label.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

/// Seed of the chain stream of `agent` in a replication seeded with `run_seed`.
pub fn agent_seed(run_seed: u64, agent: usize) -> u64 {
    derive(derive(run_seed, AGENT_TAG), agent as u64)
}

/// Seed of the delay stream of a replication.
pub fn delay_seed(run_seed: u64) -> u64 {
    derive(run_seed, DELAY_TAG)
}

/// Seed of replication `rep` within grid cell `cell`.
pub fn replication_seed(master: u64, cell: usize, rep: usize) -> u64 {
    derive(derive(master, cell as u64), rep as u64)
}
