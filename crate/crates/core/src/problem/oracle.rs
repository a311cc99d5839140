use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ProblemInstance;
use crate::error::{Error, Result};

/// Minibatch size of a gradient oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BatchSize {
    /// Exact expectation.
    Full,
    Samples(usize),
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Full => write!(f, "full"),
            BatchSize::Samples(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for BatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(BatchSize::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(BatchSize::Samples(n)),
            _ => Err(Error::InvalidInput(format!("batch must be 'full' or a positive integer, got '{s}'"))),
        }
    }
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Samples(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(usize),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(0) => Err(serde::de::Error::custom("batch size must be positive")),
            Repr::Count(n) => Ok(BatchSize::Samples(n)),
            Repr::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Gradient oracle configuration: batch size and the seed of its sample stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradientOracle {
    pub batch: BatchSize,
    pub seed: u64,
}

impl GradientOracle {
    pub fn full() -> Self {
        Self { batch: BatchSize::Full, seed: 0 }
    }

    pub fn new(batch: BatchSize, seed: u64) -> Self {
        Self { batch, seed }
    }

    pub fn stochastic(batch: usize, seed: u64) -> Self {
        Self { batch: BatchSize::Samples(batch.max(1)), seed }
    }

    /// True when evaluations do not depend on the random stream.
    pub fn is_deterministic(&self, p: &ProblemInstance) -> bool {
        self.batch == BatchSize::Full || !p.is_stochastic()
    }

    /// Fresh sample stream; every evaluation consumes fresh draws.
    pub fn stream(&self) -> OracleStream {
        OracleStream { batch: self.batch, rng: ChaCha8Rng::seed_from_u64(self.seed) }
    }
}

impl Default for GradientOracle {
    fn default() -> Self {
        Self::full()
    }
}

/// Stateful evaluator that resamples the batch on every call.
#[derive(Clone, Debug)]
pub struct OracleStream {
    batch: BatchSize,
    rng: ChaCha8Rng,
}

impl OracleStream {
    pub fn batch(&self) -> BatchSize {
        self.batch
    }

    pub fn eval(&mut self, p: &ProblemInstance, z: &DVector<f64>) -> Result<DVector<f64>> {
        match self.batch {
            BatchSize::Samples(n) if p.is_stochastic() => p.sample_field(z, n, &mut self.rng),
            _ => p.field(z),
        }
    }
}
