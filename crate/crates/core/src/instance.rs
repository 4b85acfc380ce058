//! Problem instances: an MRP paired with its feature matrix.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_orthonormal_features, FeatureMatrix};
use crate::mrp::{generate_ergodic_mrp, MarkovRewardProcess, TransitionKernel};

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub mrp: MarkovRewardProcess,
    pub phi: FeatureMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Orthonormal,
    Tabular,
}

fn default_smoothing() -> f64 {
    0.1
}

/// How to obtain an instance: generate it, embed it, or load it from files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Random {
        n: usize,
        m: usize,
        gamma: f64,
        reward_bound: f64,
        #[serde(default = "default_smoothing")]
        smoothing: f64,
        features: FeatureMode,
        seed: u64,
    },
    Explicit {
        mrp: MarkovRewardProcess,
        features: FeatureMatrix,
    },
    Files {
        mrp_path: PathBuf,
        features_path: PathBuf,
    },
}

impl InstanceSpec {
    pub fn build(&self) -> Result<Instance> {
        match self {
            InstanceSpec::Random {
                n,
                m,
                gamma,
                reward_bound,
                smoothing,
                features,
                seed,
            } => {
                let mrp = generate_ergodic_mrp(*n, *gamma, *reward_bound, *smoothing, *seed)?;
                let phi = match features {
                    FeatureMode::Orthonormal => {
                        build_orthonormal_features(*n, *m, crate::seed::derive(*seed, 0xfea7))?
                    }
                    FeatureMode::Tabular => {
                        if *m != *n {
                            return Err(Error::Config(format!(
                                "tabular features need m = n, got m = {m}, n = {n}"
                            )));
                        }
                        FeatureMatrix::identity(*n)
                    }
                };
                Ok(Instance { mrp, phi })
            }
            InstanceSpec::Explicit { mrp, features } => {
                if features.n() != mrp.n() {
                    return Err(Error::DimensionMismatch {
                        expected: mrp.n(),
                        got: features.n(),
                    });
                }
                Ok(Instance {
                    mrp: mrp.clone(),
                    phi: features.clone(),
                })
            }
            InstanceSpec::Files {
                mrp_path,
                features_path,
            } => {
                let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
                let mrp = MarkovRewardProcess::from_json(&read(mrp_path)?)?;
                let phi = FeatureMatrix::from_json(&read(features_path)?)?;
                InstanceSpec::Explicit { mrp, features: phi }.build()
            }
        }
    }

    /// Resolves relative file paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let InstanceSpec::Files {
            mrp_path,
            features_path,
        } = self
        {
            for p in [mrp_path, features_path] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
}

/// The two-state reference chain `P = [[0.9, 0.1], [0.2, 0.8]]`, `r = (1, 0)`,
/// `gamma = 0.5`, with tabular features.
pub fn two_state() -> (MarkovRewardProcess, FeatureMatrix) {
    let kernel = TransitionKernel::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).expect("valid kernel");
    let mrp = MarkovRewardProcess::new(kernel, vec![1.0, 0.0], 0.5, 1.0).expect("valid mrp");
    (mrp, FeatureMatrix::identity(2))
}

/// An MRP whose every row equals `q`, so the chain mixes in one step.
pub fn rank_one(q: &[f64], gamma: f64) -> Result<MarkovRewardProcess> {
    let n = q.len();
    let kernel = TransitionKernel::from_matrix(&DMatrix::from_fn(n, n, |_, j| q[j]))?;
    let rewards: Vec<f64> = (0..n).map(|s| (s as f64 + 1.0) / n as f64).collect();
    MarkovRewardProcess::new(kernel, rewards, gamma, 1.0)
}
