use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{prepare, run_grid, write_json, CellRun, ExperimentConfig};
use crate::bounds::EmpiricalBall;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellBall {
    pub label: String,
    pub n_agents: usize,
    pub delay: String,
    pub tau_max: usize,
    pub ball: EmpiricalBall,
    pub max_delta_sq: f64,
}

/// Log-log fit of the ball against `N` for one delay model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub delay: String,
    pub n_agents: Vec<usize>,
    pub slope: f64,
    /// `ball(N_min) / ball(N)` for each `N`.
    pub speedup: Vec<f64>,
}

/// Ball against `tau_max` at fixed `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayOrdering {
    pub n_agents: usize,
    pub tau_max: Vec<usize>,
    pub balls: Vec<f64>,
    /// Every pair is ordered up to three combined standard errors.
    pub nondecreasing: bool,
    /// `(ball(max tau_max) - ball(min tau_max))` in combined standard errors.
    pub gap_in_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub tail_fraction: f64,
    pub cells: Vec<CellBall>,
    pub scaling: Vec<ScalingFit>,
    pub delay_ordering: Vec<DelayOrdering>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InsufficientGrid(
            "log-log fit needs two or more positive points".into(),
        ));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientGrid("log-log fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

fn combined_se(a: &EmpiricalBall, b: &EmpiricalBall) -> f64 {
    (a.standard_error.powi(2) + b.standard_error.powi(2)).sqrt()
}

impl SweepReport {
    pub fn from_cells(cells: &[CellRun], tail_fraction: f64) -> Result<Self> {
        let balls: Vec<CellBall> = cells
            .iter()
            .map(|c| {
                Ok(CellBall {
                    label: c.cell.label(),
                    n_agents: c.cell.n_agents,
                    delay: c.cell.delay.label(),
                    tau_max: c.cell.delay.tau_max,
                    ball: c.ball(tail_fraction)?,
                    max_delta_sq: c.max_delta_sq(),
                })
            })
            .collect::<Result<_>>()?;

        let mut delays: Vec<String> = Vec::new();
        let mut ns: Vec<usize> = Vec::new();
        for b in &balls {
            if !delays.contains(&b.delay) {
                delays.push(b.delay.clone());
            }
            if !ns.contains(&b.n_agents) {
                ns.push(b.n_agents);
            }
        }

        let mut scaling = Vec::new();
        for d in &delays {
            let mut row: Vec<&CellBall> = balls.iter().filter(|b| &b.delay == d).collect();
            row.sort_by_key(|b| b.n_agents);
            if row.len() < 3 {
                continue;
            }
            let pts: Vec<(f64, f64)> = row
                .iter()
                .map(|b| (b.n_agents as f64, b.ball.mean))
                .collect();
            scaling.push(ScalingFit {
                delay: d.clone(),
                n_agents: row.iter().map(|b| b.n_agents).collect(),
                slope: log_log_slope(&pts)?,
                speedup: row.iter().map(|b| row[0].ball.mean / b.ball.mean).collect(),
            });
        }

        let mut delay_ordering = Vec::new();
        for &n in &ns {
            let mut row: Vec<&CellBall> = balls.iter().filter(|b| b.n_agents == n).collect();
            row.sort_by_key(|b| b.tau_max);
            if row.len() < 3 {
                continue;
            }
            let mut nondecreasing = true;
            for i in 0..row.len() {
                for j in i + 1..row.len() {
                    let (a, b) = (&row[i].ball, &row[j].ball);
                    if b.mean < a.mean - 3.0 * combined_se(a, b) {
                        nondecreasing = false;
                    }
                }
            }
            let (first, last) = (&row[0].ball, &row[row.len() - 1].ball);
            delay_ordering.push(DelayOrdering {
                n_agents: n,
                tau_max: row.iter().map(|b| b.tau_max).collect(),
                balls: row.iter().map(|b| b.ball.mean).collect(),
                nondecreasing,
                gap_in_stderr: (last.mean - first.mean) / combined_se(first, last),
            });
        }

        if scaling.is_empty() && delay_ordering.is_empty() {
            return Err(Error::InsufficientGrid(
                "a sweep needs three or more N values or three or more delay models".into(),
            ));
        }
        Ok(SweepReport {
            tail_fraction,
            cells: balls,
            scaling,
            delay_ordering,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["label", "n_agents", "delay", "tau_max", "ball", "stderr", "max_delta_sq"])?;
        for c in &self.cells {
            w.write_record([
                c.label.clone(),
                c.n_agents.to_string(),
                c.delay.clone(),
                c.tau_max.to_string(),
                c.ball.mean.to_string(),
                c.ball.standard_error.to_string(),
                c.max_delta_sq.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Runs the grid and summarises the tail balls: `1/N` slopes per delay
/// model and delay orderings per `N`. Writes `sweep.json` and `sweep.csv`.
pub fn cmd_sweep(config: &ExperimentConfig, out: Option<&Path>) -> Result<SweepReport> {
    let cells = config.cells();
    let distinct = |mut v: Vec<String>| {
        v.sort();
        v.dedup();
        v.len()
    };
    let n_count = distinct(cells.iter().map(|c| c.n_agents.to_string()).collect());
    let d_count = distinct(cells.iter().map(|c| c.delay.label()).collect());
    if n_count < 3 && d_count < 3 {
        return Err(Error::InsufficientGrid(format!(
            "grid has {n_count} N values and {d_count} delay models; need three of either"
        )));
    }
    let prep = prepare(config)?;
    let runs = run_grid(config, &prep)?;
    let report = SweepReport::from_cells(&runs, config.analysis.tail_fraction)?;
    if let Some(dir) = out {
        write_json(&dir.join("sweep.json"), &report)?;
        report.write_csv(&dir.join("sweep.csv"))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::tests::two_state_config;
    use super::*;
    use crate::engine::DelayModel;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&n| (n, 3.0 / n)).collect();
        assert!((log_log_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
        assert!(log_log_slope(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn single_cell_grid_is_rejected() {
        let config = two_state_config(vec![1], vec![DelayModel::none()]);
        assert!(matches!(cmd_sweep(&config, None), Err(Error::InsufficientGrid(_))));
    }

    #[test]
    fn sweep_over_agents() {
        let mut config = two_state_config(vec![1, 2, 4], vec![DelayModel::none()]);
        config.grid.iterations = 2000;
        config.grid.replications = 8;
        let dir = tempfile::tempdir().unwrap();
        let report = cmd_sweep(&config, Some(dir.path())).unwrap();
        assert_eq!(report.cells.len(), 3);
        assert_eq!(report.scaling.len(), 1);
        assert!(report.scaling[0].slope < 0.0);
        assert!(report.delay_ordering.is_empty());
        assert!(dir.path().join("sweep.json").exists());
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
    }
}
