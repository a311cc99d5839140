use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::AlgorithmKind;
use crate::error::{Error, Result};
use crate::problem::{BatchSize, GradientOracle};

pub const DIVERGED_FLAG: &str = "diverged";

/// One recorded state: a step index for discrete runs, a time for ODE runs.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub k: Option<u64>,
    pub t: Option<f64>,
    pub z: DVector<f64>,
}

/// Run metadata, written as the JSON sidecar of a trajectory CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub algorithm: AlgorithmKind,
    pub s: f64,
    pub alpha: f64,
    pub seed: u64,
    pub batch_size: BatchSize,
    pub init: Vec<f64>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl TrajectoryMeta {
    pub fn new(algorithm: AlgorithmKind, s: f64, alpha: f64, oracle: &GradientOracle, init: &DVector<f64>) -> Self {
        Self {
            algorithm,
            s,
            alpha,
            seed: oracle.seed,
            batch_size: oracle.batch,
            init: init.iter().copied().collect(),
            flags: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub meta: TrajectoryMeta,
}

fn fmt_num(out: &mut String, v: f64) {
    // 17 significant digits round-trip every double.
    let _ = write!(out, "{v:.16e}");
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta) -> Self {
        Self { states: Vec::new(), meta }
    }

    pub fn push_step(&mut self, k: u64, z: DVector<f64>) {
        self.states.push(State { k: Some(k), t: None, z });
    }

    pub fn push_time(&mut self, t: f64, z: DVector<f64>) {
        self.states.push(State { k: None, t: Some(t), z });
    }

    pub fn flag_divergence(&mut self) {
        if !self.diverged() {
            self.meta.flags.push(DIVERGED_FLAG.to_string());
        }
    }

    pub fn diverged(&self) -> bool {
        self.meta.flags.iter().any(|f| f == DIVERGED_FLAG)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &State {
        &self.states[0]
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(self.meta.init.len(), |s| s.z.len())
    }

    /// `‖z_k − z*‖` for every recorded state.
    pub fn radii(&self, z_star: &DVector<f64>) -> Vec<f64> {
        self.states.iter().map(|s| (&s.z - z_star).norm()).collect()
    }

    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("k,t");
        for i in 1..=d {
            let _ = write!(out, ",z{i}");
        }
        out.push('\n');
        for st in &self.states {
            if let Some(k) = st.k {
                let _ = write!(out, "{k}");
            }
            out.push(',');
            if let Some(t) = st.t {
                fmt_num(&mut out, t);
            }
            for v in st.z.iter() {
                out.push(',');
                fmt_num(&mut out, *v);
            }
            out.push('\n');
        }
        out
    }

    /// Parses CSV produced by [`Trajectory::to_csv`].
    pub fn from_csv(text: &str, meta: TrajectoryMeta) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidInput("empty trajectory CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[0] != "k" || cols[1] != "t" {
            return Err(Error::InvalidInput("trajectory CSV header must start with 'k,t,z1'".into()));
        }
        let d = cols.len() - 2;
        let mut traj = Trajectory::new(meta);
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != d + 2 {
                return Err(Error::InvalidInput(format!("row {} has {} fields, expected {}", row + 1, fields.len(), d + 2)));
            }
            let bad = |f: &str| Error::InvalidInput(format!("row {}: bad number '{f}'", row + 1));
            let k = if fields[0].is_empty() { None } else { Some(fields[0].parse::<u64>().map_err(|_| bad(fields[0]))?) };
            let t = if fields[1].is_empty() { None } else { Some(fields[1].parse::<f64>().map_err(|_| bad(fields[1]))?) };
            if k.is_none() && t.is_none() {
                return Err(Error::InvalidInput(format!("row {} has neither k nor t", row + 1)));
            }
            let z = fields[2..].iter().map(|f| f.parse::<f64>().map_err(|_| bad(f))).collect::<Result<Vec<_>>>()?;
            traj.states.push(State { k, t, z: DVector::from_vec(z) });
        }
        traj.check_order()?;
        Ok(traj)
    }

    fn check_order(&self) -> Result<()> {
        for w in self.states.windows(2) {
            let ok = match (w[0].k, w[1].k, w[0].t, w[1].t) {
                (Some(a), Some(b), _, _) => b > a,
                (_, _, Some(a), Some(b)) => b > a,
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidInput("trajectory index/time must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn meta_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.meta)? + "\n")
    }

    /// Reads a CSV and, when present, its `.meta.json` sidecar.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let meta_path = meta_path_for(path);
        let meta = match std::fs::read_to_string(&meta_path) {
            Ok(m) => serde_json::from_str(&m)?,
            Err(_) => TrajectoryMeta {
                algorithm: AlgorithmKind::Gf,
                s: 0.0,
                alpha: 0.0,
                seed: 0,
                batch_size: BatchSize::Full,
                init: Vec::new(),
                flags: Vec::new(),
            },
        };
        let mut traj = Self::from_csv(&text, meta)?;
        if traj.meta.init.is_empty() {
            if let Some(s) = traj.states.first() {
                traj.meta.init = s.z.iter().copied().collect();
            }
        }
        Ok(traj)
    }
}

/// `run.csv` → `run.meta.json`.
pub fn meta_path_for(path: &Path) -> std::path::PathBuf {
    path.with_extension("meta.json")
}
