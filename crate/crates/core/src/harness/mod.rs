//! Experiment orchestration: configuration grids, replicated runs,
//! aggregation, sweeps, the verification battery and plot data.

mod plot;
mod sweep;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{empirical_ball, BoundConstants, EmpiricalBall};
use crate::engine::{run_ensemble, write_trajectory_csv, DelayModel, RunParams, RunRecord};
use crate::error::{Error, Result};
use crate::ground_truth::GroundTruth;
use crate::instance::{Instance, InstanceSpec};
use crate::mixing::{log_scaling_constant, MixingAnalyzer, DEFAULT_SCAN_CAP};

pub use plot::{cmd_plot_data, project_series, read_aggregate_csv, PlotOutput, Series};
pub use sweep::{cmd_sweep, log_log_slope, CellBall, DelayOrdering, ScalingFit, SweepReport};
pub use verify::{cmd_verify, Verdict, VerifyReport};

fn default_q() -> u32 {
    2
}

fn default_tail_fraction() -> f64 {
    0.5
}

fn default_replications() -> usize {
    20
}

fn default_iterations() -> usize {
    crate::engine::DEFAULT_ITERATIONS
}

/// The run grid: every `(N, delay model)` pair is one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunGrid {
    pub n_agents: Vec<usize>,
    pub delays: Vec<DelayModel>,
    pub alpha: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default)]
    pub record_full_theta: bool,
    #[serde(default)]
    pub constants: BoundConstants,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            q: default_q(),
            tail_fraction: default_tail_fraction(),
            record_full_theta: false,
            constants: BoundConstants::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub grid: RunGrid,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

/// One grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub n_agents: usize,
    pub delay: DelayModel,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("N={} delay={}", self.n_agents, self.delay)
    }

    /// File-name-safe form of the label.
    pub fn slug(&self) -> String {
        let raw = format!("n{}_{}", self.n_agents, self.delay);
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect::<String>()
            .trim_end_matches('_')
            .to_string()
    }

    /// Seed key of the cell. It depends only on `N`, so cells that differ
    /// only in their delay model share agent streams, and adding cells never
    /// changes the streams of existing ones.
    pub fn seed_key(&self) -> usize {
        self.n_agents
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)?;
        if let Some(dir) = path.parent() {
            config.instance.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if g.n_agents.is_empty() || g.delays.is_empty() {
            return Err(Error::Config("the run grid is empty".into()));
        }
        if g.n_agents.contains(&0) {
            return Err(Error::Config("every N must be at least 1".into()));
        }
        if !(g.alpha >= 0.0 && g.alpha.is_finite()) {
            return Err(Error::Config(format!("invalid step size {}", g.alpha)));
        }
        for d in &g.delays {
            d.validate()?;
        }
        if self.analysis.q == 0 {
            return Err(Error::Config("q must be at least 1".into()));
        }
        self.analysis.constants.validate()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &n_agents in &self.grid.n_agents {
            for delay in &self.grid.delays {
                cells.push(Cell {
                    n_agents,
                    delay: delay.clone(),
                });
            }
        }
        cells
    }

    pub fn params(&self, cell: &Cell) -> RunParams {
        let mut p = RunParams::new(
            cell.n_agents,
            self.grid.iterations,
            self.grid.alpha,
            cell.delay.clone(),
        );
        p.record_full_theta = self.analysis.record_full_theta;
        p.theta0 = self.grid.theta0.clone();
        p
    }

    /// Precision `alpha^q` used to select the mixing time.
    pub fn epsilon(&self) -> f64 {
        self.grid.alpha.powi(self.analysis.q as i32)
    }
}

/// Instance, ground truth and mixing time shared by every command.
pub struct Prepared {
    pub instance: Instance,
    pub ground_truth: GroundTruth,
    /// `None` when `alpha = 0`, where the precision `alpha^q` is zero.
    pub tau_epsilon: Option<usize>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let instance = config.instance.build()?;
    let theta_0 = config.params(&config.cells()[0]).theta_0(instance.phi.m());
    let ground_truth = GroundTruth::compute(&instance.mrp, &instance.phi, &theta_0)?;
    let epsilon = config.epsilon();
    let tau_epsilon = if epsilon > 0.0 {
        let analyzer = MixingAnalyzer::new(&instance.mrp, &instance.phi)?;
        Some(analyzer.mixing_time(epsilon, DEFAULT_SCAN_CAP)?)
    } else {
        None
    };
    Ok(Prepared {
        instance,
        ground_truth,
        tau_epsilon,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthOutput {
    pub theta_star: Vec<f64>,
    pub omega: f64,
    pub sigma: f64,
    pub value: Vec<f64>,
    pub stationary: Vec<f64>,
    pub alpha: f64,
    pub q: u32,
    pub epsilon: f64,
    pub tau_epsilon: Option<usize>,
    /// `tau_epsilon / log(1 / epsilon)`.
    pub log_scaling_constant: Option<f64>,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Builds the instance and reports `theta*`, `omega`, `sigma`, `V` and the
/// mixing time at `epsilon = alpha^q`; writes `ground_truth.json` under `out`.
pub fn cmd_ground_truth(config: &ExperimentConfig, out: Option<&Path>) -> Result<GroundTruthOutput> {
    let prep = prepare(config)?;
    let gt = &prep.ground_truth;
    let epsilon = config.epsilon();
    let report = GroundTruthOutput {
        theta_star: gt.theta_star.iter().copied().collect(),
        omega: gt.omega,
        sigma: gt.sigma_const,
        value: gt.value.iter().copied().collect(),
        stationary: gt.pi.as_vector().iter().copied().collect(),
        alpha: config.grid.alpha,
        q: config.analysis.q,
        epsilon,
        tau_epsilon: prep.tau_epsilon,
        log_scaling_constant: prep
            .tau_epsilon
            .filter(|_| epsilon < 1.0)
            .map(|t| log_scaling_constant(t, epsilon)),
    };
    if let Some(dir) = out {
        write_json(&dir.join("ground_truth.json"), &report)?;
    }
    Ok(report)
}

/// Replications of one cell and their ensemble statistics.
#[derive(Clone, Debug)]
pub struct CellRun {
    pub cell: Cell,
    pub records: Vec<RunRecord>,
    /// Mean `delta_k^2` over replications at each `k`.
    pub mean: Vec<f64>,
    /// Standard error of `mean` at each `k`.
    pub stderr: Vec<f64>,
}

impl CellRun {
    pub fn ball(&self, tail_fraction: f64) -> Result<EmpiricalBall> {
        empirical_ball(&self.records, tail_fraction)
    }

    pub fn max_delta_sq(&self) -> f64 {
        self.records
            .iter()
            .flat_map(|r| r.delta_sq.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Per-step mean and standard error across replications.
pub fn aggregate(records: &[RunRecord]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mean = crate::engine::lemmas::mean_delta_sq(records)?;
    let r = records.len() as f64;
    let stderr = mean
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            if records.len() < 2 {
                return 0.0;
            }
            let ss: f64 = records.iter().map(|rec| (rec.delta_sq[k] - m).powi(2)).sum();
            (ss / (r - 1.0) / r).sqrt()
        })
        .collect();
    Ok((mean, stderr))
}

/// Writes `k,mean_delta_sq,stderr` rows.
pub fn write_aggregate_csv(path: &Path, mean: &[f64], stderr: &[f64]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["k", "mean_delta_sq", "stderr"])?;
    for (k, (m, s)) in mean.iter().zip(stderr).enumerate() {
        w.write_record([k.to_string(), m.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every cell of the grid; cells run in sequence, replications in parallel.
pub fn run_grid(config: &ExperimentConfig, prep: &Prepared) -> Result<Vec<CellRun>> {
    config
        .cells()
        .into_iter()
        .map(|cell| {
            let params = config.params(&cell);
            let records = run_ensemble(
                &prep.instance,
                &prep.ground_truth.theta_star,
                &params,
                config.grid.seed,
                cell.seed_key(),
                config.grid.replications,
            )?;
            let (mean, stderr) = aggregate(&records)?;
            Ok(CellRun {
                cell,
                records,
                mean,
                stderr,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifestEntry {
    pub label: String,
    pub aggregate_csv: PathBuf,
    pub run_csvs: Vec<PathBuf>,
}

/// Executes the grid. With `out`, writes for each cell
/// `<slug>/run_<r>.csv` and `.json` per replication plus `<slug>_aggregate.csv`,
/// and a `manifest.json` listing them.
pub fn cmd_run(config: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<CellRun>> {
    let prep = prepare(config)?;
    let cells = run_grid(config, &prep)?;
    if let Some(dir) = out {
        let mut manifest = Vec::new();
        for cell in &cells {
            let slug = cell.cell.slug();
            let cell_dir = dir.join(&slug);
            fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
            let mut run_csvs = Vec::new();
            for (r, rec) in cell.records.iter().enumerate() {
                let csv_path = cell_dir.join(format!("run_{r:03}.csv"));
                write_trajectory_csv(&csv_path, &rec.delta_sq)?;
                rec.write_json(&cell_dir.join(format!("run_{r:03}.json")))?;
                run_csvs.push(PathBuf::from(&slug).join(format!("run_{r:03}.csv")));
            }
            let aggregate_csv = PathBuf::from(format!("{slug}_aggregate.csv"));
            write_aggregate_csv(&dir.join(&aggregate_csv), &cell.mean, &cell.stderr)?;
            manifest.push(RunManifestEntry {
                label: cell.cell.label(),
                aggregate_csv,
                run_csvs,
            });
        }
        write_json(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(cells)
}
