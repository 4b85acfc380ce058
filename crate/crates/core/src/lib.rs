//! Asynchronous multi-agent TD(0) with linear function approximation under
//! bounded delays, together with the exact quantities (fixed point, mixing
//! coefficients, finite-time bounds) needed to check its behaviour.

pub mod bounds;
pub mod engine;
mod error;
pub mod features;
pub mod ground_truth;
pub mod harness;
pub mod instance;
pub mod mixing;
pub mod mrp;
pub mod seed;
pub mod td;

pub use error::{Error, Result};
pub use features::{build_orthonormal_features, FeatureMatrix};
pub use ground_truth::GroundTruth;
pub use instance::{Instance, InstanceSpec};
pub use mrp::{generate_ergodic_mrp, MarkovRewardProcess, Observation, StationaryDistribution, TransitionKernel};
