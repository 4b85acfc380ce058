//! The asynchronous multi-agent TD(0) loop.
//!
//! `N` agents each advance their own copy of the chain once per global
//! step. The server averages each agent's TD direction evaluated at a
//! possibly stale `(iterate, observation)` pair, `t_{i,k} = (k - tau_{i,k})_+`,
//! and takes a constant-step update. Both the iterates and the
//! observations are kept in ring buffers of length `tau_max + 1`.

mod delay;
pub mod lemmas;
mod run;

use std::collections::VecDeque;

pub use delay::{DelayKind, DelayModel};
pub use run::{
    delta_kh, run, run_ensemble, write_trajectory_csv, RunConfig, RunParams, RunRecord,
    DEFAULT_ITERATIONS,
    RunSummary,
};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::mrp::{MarkovRewardProcess, Observation};
use crate::seed::{self, Stream};
use crate::td::accumulate_direction;

/// One agent: its chain position, recent observations and private stream.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub id: usize,
    chain_state: usize,
    /// Global step of `obs_buffer[0]`.
    obs_start: usize,
    obs_buffer: VecDeque<Observation>,
    capacity: usize,
    rng: Stream,
}

impl AgentState {
    pub fn new(id: usize, initial_state: usize, tau_max: usize, agent_seed: u64) -> Self {
        AgentState {
            id,
            chain_state: initial_state,
            obs_start: 0,
            obs_buffer: VecDeque::with_capacity(tau_max + 1),
            capacity: tau_max + 1,
            rng: seed::stream(agent_seed),
        }
    }

    pub fn chain_state(&self) -> usize {
        self.chain_state
    }

    /// Draws the next observation of this agent's chain and buffers it.
    fn advance(&mut self, mrp: &MarkovRewardProcess) {
        let obs = mrp.sample_step(self.chain_state, &mut self.rng);
        self.chain_state = obs.next_state;
        if self.obs_buffer.len() == self.capacity {
            self.obs_buffer.pop_front();
            self.obs_start += 1;
        }
        self.obs_buffer.push_back(obs);
    }

    /// Observation `o_{i,j}`, if still buffered.
    pub fn observation(&self, j: usize) -> Option<&Observation> {
        j.checked_sub(self.obs_start)
            .and_then(|idx| self.obs_buffer.get(idx))
    }
}

/// Server-side state: the current iterate and the last `tau_max + 1` iterates.
#[derive(Clone, Debug)]
pub struct ServerState {
    k: usize,
    /// Global step of `theta_buffer[0]`; the back is the current iterate.
    theta_start: usize,
    theta_buffer: VecDeque<Vec<f64>>,
    capacity: usize,
    pub alpha: f64,
    scratch: Vec<f64>,
    last_sources: Vec<usize>,
    last_v_norm_sq: f64,
}

impl ServerState {
    pub fn new(theta_0: Vec<f64>, alpha: f64, tau_max: usize) -> Self {
        let m = theta_0.len();
        let mut theta_buffer = VecDeque::with_capacity(tau_max + 1);
        theta_buffer.push_back(theta_0);
        ServerState {
            k: 0,
            theta_start: 0,
            theta_buffer,
            capacity: tau_max + 1,
            alpha,
            scratch: vec![0.0; m],
            last_sources: Vec::new(),
            last_v_norm_sq: 0.0,
        }
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> &[f64] {
        self.theta_buffer.back().expect("buffer holds the current iterate")
    }

    /// Iterate `theta_j`, if still buffered.
    pub fn iterate(&self, j: usize) -> Option<&[f64]> {
        j.checked_sub(self.theta_start)
            .and_then(|idx| self.theta_buffer.get(idx))
            .map(Vec::as_slice)
    }

    /// `t_{i,k}` consumed from each agent by the most recent step.
    pub fn last_sources(&self) -> &[usize] {
        &self.last_sources
    }

    /// `|v_k|^2` of the most recent step.
    pub fn last_v_norm_sq(&self) -> f64 {
        self.last_v_norm_sq
    }
}

/// One global step `k -> k + 1`.
///
/// Every agent advances its chain once (appending `o_{i,k}`), then each
/// contributes `g(theta_{t}, o_{i,t})` with `t = (k - tau_{i,k})_+`. The
/// average is summed in ascending agent order before the update
/// `theta_{k+1} = theta_k + alpha * v_k`.
pub fn step(
    server: &mut ServerState,
    agents: &mut [AgentState],
    mrp: &MarkovRewardProcess,
    phi: &FeatureMatrix,
    delay: &DelayModel,
    delay_rng: &mut Stream,
) -> Result<()> {
    let k = server.k;
    let gamma = mrp.gamma();
    for agent in agents.iter_mut() {
        agent.advance(mrp);
    }

    let mut v = std::mem::take(&mut server.scratch);
    v.iter_mut().for_each(|x| *x = 0.0);
    server.last_sources.clear();
    for agent in agents.iter() {
        let tau = delay.draw(agent.id, k, delay_rng)?;
        if tau > delay.tau_max {
            return Err(Error::BufferMiss {
                agent: agent.id,
                step: k,
                delay: tau,
                tau_max: delay.tau_max,
            });
        }
        let t = k.saturating_sub(tau);
        let miss = || Error::BufferMiss {
            agent: agent.id,
            step: k,
            delay: tau,
            tau_max: delay.tau_max,
        };
        let theta_t = server.iterate(t).ok_or_else(miss)?;
        let obs = agent.observation(t).ok_or_else(miss)?;
        accumulate_direction(phi, gamma, theta_t, obs, &mut v);
        server.last_sources.push(t);
    }
    let count = agents.len() as f64;
    v.iter_mut().for_each(|x| *x /= count);
    server.last_v_norm_sq = v.iter().map(|x| x * x).sum();

    let alpha = server.alpha;
    let next: Vec<f64> = server
        .theta()
        .iter()
        .zip(&v)
        .map(|(t, vj)| t + alpha * vj)
        .collect();
    server.scratch = v;
    if server.theta_buffer.len() == server.capacity {
        server.theta_buffer.pop_front();
        server.theta_start += 1;
    }
    server.theta_buffer.push_back(next);
    server.k += 1;
    Ok(())
}
