//! Serializable run configurations; a sidecar holds one of these and replays it.

use std::path::PathBuf;

use minimax_core::bifurcation::BifurcationOptions;
use minimax_core::lab::LimitThresholds;
use minimax_core::{AlgorithmKind, BatchSize, ProblemDescriptor};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Stability(StabilityConfig),
    Bifurcate(BifurcateConfig),
    Classify(ClassifyConfig),
    Sweep(SweepConfig),
}

impl RunConfig {
    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            RunConfig::Simulate(c) => c.out.as_ref(),
            RunConfig::Stability(c) => c.out.as_ref(),
            RunConfig::Bifurcate(c) => c.out.as_ref(),
            RunConfig::Classify(c) => c.out.as_ref(),
            RunConfig::Sweep(c) => c.out.as_ref(),
        }
    }

    pub fn set_out(&mut self, out: Option<PathBuf>) {
        match self {
            RunConfig::Simulate(c) => c.out = out,
            RunConfig::Stability(c) => c.out = out,
            RunConfig::Bifurcate(c) => c.out = out,
            RunConfig::Classify(c) => c.out = out,
            RunConfig::Sweep(c) => c.out = out,
        }
    }
}

/// Discrete runs use `steps`; continuous runs integrate to `t_end` with step `dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub problem: ProblemDescriptor,
    pub algorithm: AlgorithmKind,
    pub s: f64,
    pub init: Vec<f64>,
    pub steps: Option<usize>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub stride: usize,
    pub seed: u64,
    pub batch: BatchSize,
    pub out: Option<PathBuf>,
    pub gnuplot: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormChoice {
    /// Conventional norm of the dynamic: scaled for AGDA, identity otherwise.
    Default,
    Identity,
    AgdaScaled,
    User(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub problem: ProblemDescriptor,
    pub algorithm: AlgorithmKind,
    pub s: f64,
    /// Tracked from the canonical stationary point when absent.
    pub z_star: Option<Vec<f64>>,
    pub norm: NormChoice,
    pub tol_boundary: f64,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcateConfig {
    pub problem: ProblemDescriptor,
    pub algorithm: AlgorithmKind,
    pub s: f64,
    pub bracket: [f64; 2],
    pub options: BifurcationOptions,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub traj: PathBuf,
    /// Origin when absent.
    pub z_star: Option<Vec<f64>>,
    pub thresholds: LimitThresholds,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub problem: ProblemDescriptor,
    pub algorithm: AlgorithmKind,
    pub s: f64,
    pub init: Vec<f64>,
    pub steps: usize,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub batches: Vec<BatchSize>,
    pub z_star: Option<Vec<f64>>,
    pub thresholds: LimitThresholds,
    pub out: Option<PathBuf>,
}
