//! Discrete and continuous-time dynamics of minimax optimization.
//!
//! The crate covers simultaneous, alternating and extragradient updates
//! (GDA, AGDA, EGM), their O(s)-resolution ODEs, linear-attractor
//! certificates at stationary points, Hopf bifurcation analysis in the
//! regularization parameter, and trajectory classification.

pub mod bifurcation;
pub mod dynamics;
pub mod error;
pub mod lab;
pub mod linalg;
pub mod problem;
pub mod stability;

pub use nalgebra;
pub use bifurcation::{BifurcationReport, HopfClassification, NormalForm2D};
pub use dynamics::{AlgorithmKind, Trajectory, VectorField};
pub use error::{Error, Result};
pub use lab::{LimitKind, LimitVerdict};
pub use problem::{BatchSize, GradientOracle, HessianBlocks, ProblemDescriptor, ProblemInstance};
pub use stability::{NormMatrix, StabilityReport, Verdict};
