use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{step, AgentState, DelayModel, ServerState};
use crate::error::{Error, Result};
use crate::ground_truth::GroundTruth;
use crate::instance::{Instance, InstanceSpec};
use crate::seed;

/// Default iteration count when a configuration does not give one.
pub const DEFAULT_ITERATIONS: usize = 5000;

fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}

fn default_replications() -> usize {
    20
}

/// Per-replication run parameters (everything but the instance and seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub n_agents: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    pub alpha: f64,
    pub delay: DelayModel,
    #[serde(default)]
    pub record_full_theta: bool,
    /// Defaults to the zero vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_state: usize,
}

impl RunParams {
    pub fn new(n_agents: usize, iterations: usize, alpha: f64, delay: DelayModel) -> Self {
        RunParams {
            n_agents,
            iterations,
            alpha,
            delay,
            record_full_theta: false,
            theta0: None,
            initial_state: 0,
        }
    }

    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("invalid step size {}", self.alpha)));
        }
        if self.initial_state >= instance.mrp.n() {
            return Err(Error::Config(format!(
                "initial state {} out of range",
                self.initial_state
            )));
        }
        if let Some(t0) = &self.theta0 {
            if t0.len() != instance.phi.m() {
                return Err(Error::DimensionMismatch {
                    expected: instance.phi.m(),
                    got: t0.len(),
                });
            }
        }
        self.delay.validate()
    }

    pub fn theta_0(&self, m: usize) -> DVector<f64> {
        match &self.theta0 {
            Some(t) => DVector::from_column_slice(t),
            None => DVector::zeros(m),
        }
    }
}

/// A run configuration file: instance, parameters, master seed, replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: InstanceSpec,
    #[serde(flatten)]
    pub params: RunParams,
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

/// Result of one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub params: RunParams,
    pub run_seed: u64,
    pub delay_seed: u64,
    pub agent_seeds: Vec<u64>,
    /// `|theta_k - theta*|^2` for `k = 0..=T`.
    pub delta_sq: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub wall_time_secs: f64,
    /// `theta_k` for `k = 0..=T` when full recording is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_trajectory: Option<Vec<Vec<f64>>>,
    /// `|v_k|^2` for `k = 0..T` when full recording is enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_norm_sq: Option<Vec<f64>>,
}

/// JSON summary persisted next to a trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub params: RunParams,
    pub run_seed: u64,
    pub delay_seed: u64,
    pub agent_seeds: Vec<u64>,
    pub iterations: usize,
    pub initial_delta_sq: f64,
    pub final_delta_sq: f64,
    pub max_delta_sq: f64,
    pub final_theta: Vec<f64>,
    pub wall_time_secs: f64,
}

impl RunRecord {
    pub fn iterations(&self) -> usize {
        self.delta_sq.len() - 1
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            params: self.params.clone(),
            run_seed: self.run_seed,
            delay_seed: self.delay_seed,
            agent_seeds: self.agent_seeds.clone(),
            iterations: self.iterations(),
            initial_delta_sq: self.delta_sq[0],
            final_delta_sq: *self.delta_sq.last().expect("non-empty trajectory"),
            max_delta_sq: self.delta_sq.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            final_theta: self.final_theta.clone(),
            wall_time_secs: self.wall_time_secs,
        }
    }

    pub fn theta(&self, k: usize) -> Result<&[f64]> {
        let traj = self
            .theta_trajectory
            .as_ref()
            .ok_or(Error::TrajectoryNotRecorded)?;
        traj.get(k)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::OutOfRange(format!("iterate {k} of {}", traj.len())))
    }
}

/// `delta_{k,h} = |theta_k - theta_{k-h}|`.
pub fn delta_kh(record: &RunRecord, k: usize, h: usize) -> Result<f64> {
    if h > k {
        return Err(Error::OutOfRange(format!("h = {h} > k = {k}")));
    }
    let a = record.theta(k)?;
    let b = record.theta(k - h)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Executes one replication seeded with `run_seed`.
pub fn run(
    instance: &Instance,
    theta_star: &DVector<f64>,
    params: &RunParams,
    run_seed: u64,
) -> Result<RunRecord> {
    params.validate(instance)?;
    let started = Instant::now();
    let m = instance.phi.m();
    let tau_max = params.delay.tau_max;
    let theta_0 = params.theta_0(m);
    let agent_seeds: Vec<u64> = (0..params.n_agents)
        .map(|i| seed::agent_seed(run_seed, i))
        .collect();
    let delay_seed = seed::delay_seed(run_seed);

    let mut server = ServerState::new(theta_0.iter().copied().collect(), params.alpha, tau_max);
    let mut agents: Vec<AgentState> = agent_seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| AgentState::new(i, params.initial_state, tau_max, s))
        .collect();
    let mut delay_rng = seed::stream(delay_seed);

    let target = theta_star.as_slice();
    let mut delta_sq = Vec::with_capacity(params.iterations + 1);
    delta_sq.push(dist_sq(server.theta(), target));
    let mut trajectory = params.record_full_theta.then(|| {
        let mut t = Vec::with_capacity(params.iterations + 1);
        t.push(server.theta().to_vec());
        t
    });
    let mut v_norm_sq = params
        .record_full_theta
        .then(|| Vec::with_capacity(params.iterations));

    for _ in 0..params.iterations {
        step(
            &mut server,
            &mut agents,
            &instance.mrp,
            &instance.phi,
            &params.delay,
            &mut delay_rng,
        )?;
        delta_sq.push(dist_sq(server.theta(), target));
        if let Some(t) = trajectory.as_mut() {
            t.push(server.theta().to_vec());
        }
        if let Some(v) = v_norm_sq.as_mut() {
            v.push(server.last_v_norm_sq());
        }
    }

    Ok(RunRecord {
        params: params.clone(),
        run_seed,
        delay_seed,
        agent_seeds,
        delta_sq,
        final_theta: server.theta().to_vec(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        theta_trajectory: trajectory,
        v_norm_sq,
    })
}

/// Runs `replications` independent replications of grid cell `cell`, in
/// parallel, with results in replication order.
pub fn run_ensemble(
    instance: &Instance,
    theta_star: &DVector<f64>,
    params: &RunParams,
    master_seed: u64,
    cell: usize,
    replications: usize,
) -> Result<Vec<RunRecord>> {
    (0..replications)
        .into_par_iter()
        .map(|rep| {
            run(
                instance,
                theta_star,
                params,
                seed::replication_seed(master_seed, cell, rep),
            )
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text)?;
        if let Some(dir) = path.parent() {
            config.instance.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn execute(&self) -> Result<(Instance, GroundTruth, Vec<RunRecord>)> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let instance = self.instance.build()?;
        self.params.validate(&instance)?;
        let gt = GroundTruth::compute(
            &instance.mrp,
            &instance.phi,
            &self.params.theta_0(instance.phi.m()),
        )?;
        let records = run_ensemble(
            &instance,
            &gt.theta_star,
            &self.params,
            self.seed,
            0,
            self.replications,
        )?;
        Ok((instance, gt, records))
    }
}

/// Writes `k,delta_sq` rows.
pub fn write_trajectory_csv(path: &Path, delta_sq: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["k", "delta_sq"])?;
    for (k, d) in delta_sq.iter().enumerate() {
        w.write_record([k.to_string(), d.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

impl RunRecord {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary())?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
