//! Trajectory experiments and limit classification by radius statistics.

use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_discrete, step, AlgorithmKind, Trajectory};
use crate::error::{Error, Result};
use crate::problem::{BatchSize, GradientOracle, ProblemInstance};
use crate::stability::log_slope;

/// Minimum number of recorded states for a classification.
pub const MIN_STATES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LimitKind {
    Converge,
    Cycle,
    Diverge,
    Undecided,
}

/// Classification thresholds; radii are relative to the initial radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitThresholds {
    pub window_frac: f64,
    pub converge_rel: f64,
    pub diverge_rel: f64,
    /// Bound on `|d log r / dk|` for a cycle.
    pub slope_tol: f64,
    /// Bound on `(max − min)/median` of the window radius for a cycle.
    pub spread_rel: f64,
}

impl Default for LimitThresholds {
    fn default() -> Self {
        Self { window_frac: 0.25, converge_rel: 1e-3, diverge_rel: 1e3, slope_tol: 1e-4, spread_rel: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitVerdict {
    pub kind: LimitKind,
    /// Median radius over the final window.
    pub final_radius: f64,
    pub slope: f64,
    /// Mean window radius, reported for cycles.
    pub cycle_radius: Option<f64>,
    pub spread: f64,
    pub steps_used: usize,
}

fn window_radii(traj: &Trajectory, z_star: &DVector<f64>, window_frac: f64) -> Vec<f64> {
    let radii = traj.radii(z_star);
    let len = radii.len();
    let w = ((window_frac * len as f64).ceil() as usize).clamp(2.min(len), len);
    radii[len - w..].to_vec()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean and max − min of the radius over the final window, without checking the verdict.
pub fn window_radius_stats(traj: &Trajectory, z_star: &DVector<f64>, window_frac: f64) -> (f64, f64) {
    let w = window_radii(traj, z_star, window_frac);
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    (mean, hi - lo)
}

pub fn classify_limit(traj: &Trajectory, z_star: &DVector<f64>, window_frac: f64) -> Result<LimitVerdict> {
    classify_limit_with(traj, z_star, &LimitThresholds { window_frac, ..LimitThresholds::default() })
}

pub fn classify_limit_with(traj: &Trajectory, z_star: &DVector<f64>, th: &LimitThresholds) -> Result<LimitVerdict> {
    if !(th.window_frac > 0.0 && th.window_frac <= 1.0) {
        return Err(Error::InvalidInput("window_frac must lie in (0, 1]".into()));
    }
    if traj.is_empty() || z_star.len() != traj.dim() {
        return Err(Error::InvalidInput("trajectory and z* dimensions differ".into()));
    }
    if !traj.diverged() && traj.len() < MIN_STATES {
        return Err(Error::InvalidInput(format!(
            "trajectory has {} states, classification needs at least {MIN_STATES}",
            traj.len()
        )));
    }
    let r0 = (&traj.first().z - z_star).norm();
    let r_ref = if r0 > 0.0 { r0 } else { 1.0 };
    let window = window_radii(traj, z_star, th.window_frac);
    let med = median(&window);
    let (mean, spread) = window_radius_stats(traj, z_star, th.window_frac);
    let logs: Vec<f64> = window.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = log_slope(&logs);
    let last = *window.last().unwrap();
    let kind = if traj.diverged() || last >= th.diverge_rel * r_ref {
        LimitKind::Diverge
    } else if r0 == 0.0 && med == 0.0 || med <= th.converge_rel * r_ref {
        LimitKind::Converge
    } else if slope.abs() <= th.slope_tol && spread <= th.spread_rel * med {
        LimitKind::Cycle
    } else {
        LimitKind::Undecided
    };
    Ok(LimitVerdict {
        kind,
        final_radius: med,
        slope,
        cycle_radius: (kind == LimitKind::Cycle).then_some(mean),
        spread,
        steps_used: traj.len() - 1,
    })
}

/// Mean and spread of the window radius of a trajectory classified as a cycle.
pub fn cycle_radius(traj: &Trajectory, z_star: &DVector<f64>) -> Result<(f64, f64)> {
    let th = LimitThresholds::default();
    let v = classify_limit_with(traj, z_star, &th)?;
    if v.kind != LimitKind::Cycle {
        return Err(Error::Precondition(format!("trajectory is classified {:?}, not a cycle", v.kind)));
    }
    Ok(window_radius_stats(traj, z_star, th.window_frac))
}

/// One cell of a batch study or sweep.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub alpha: f64,
    pub seed: u64,
    pub batch: BatchSize,
    pub verdict: LimitVerdict,
    /// RMS distance between each stochastic iterate and the exact-gradient
    /// step from the same previous iterate.
    pub noise_level: f64,
    pub trajectory: Trajectory,
}

fn noise_level(p: &ProblemInstance, kind: AlgorithmKind, s: f64, traj: &Trajectory) -> Result<f64> {
    if traj.meta.batch_size == BatchSize::Full || traj.len() < 2 {
        return Ok(0.0);
    }
    let mut full = GradientOracle::full().stream();
    let mut acc = 0.0;
    for w in traj.states.windows(2) {
        let exact = step(p, kind, &w[0].z, s, &mut full)?;
        acc += (&w[1].z - exact).norm_squared();
    }
    Ok((acc / (traj.len() - 1) as f64).sqrt())
}

/// Grid cell specification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub alpha: f64,
    pub seed: u64,
    pub batch: BatchSize,
}

/// Cells in grid order: α outermost, then seed, then batch.
pub fn grid(alphas: &[f64], seeds: &[u64], batches: &[BatchSize]) -> Vec<Cell> {
    let mut out = Vec::with_capacity(alphas.len() * seeds.len() * batches.len());
    for &alpha in alphas {
        for &seed in seeds {
            for &batch in batches {
                out.push(Cell { alpha, seed, batch });
            }
        }
    }
    out
}

/// Runs every cell (in parallel on the current rayon pool) and returns
/// outcomes in grid order.
#[allow(clippy::too_many_arguments)]
pub fn run_grid(
    p: &ProblemInstance,
    kind: AlgorithmKind,
    s: f64,
    z0: &DVector<f64>,
    z_star: &DVector<f64>,
    n_steps: usize,
    cells: &[Cell],
    th: &LimitThresholds,
) -> Result<Vec<RunOutcome>> {
    cells
        .par_iter()
        .map(|cell| {
            let pa = if cell.alpha == p.alpha() { p.clone() } else { p.with_alpha(cell.alpha)? };
            let oracle = GradientOracle::new(cell.batch, cell.seed);
            let trajectory = run_discrete(&pa, kind, z0, s, n_steps, &oracle)?;
            let verdict = classify_limit_with(&trajectory, z_star, th)?;
            let noise_level = noise_level(&pa, kind, s, &trajectory)?;
            Ok(RunOutcome { alpha: cell.alpha, seed: cell.seed, batch: cell.batch, verdict, noise_level, trajectory })
        })
        .collect()
}

/// Stochastic runs over batch sizes and seeds at a fixed α.
#[allow(clippy::too_many_arguments)]
pub fn batch_study(
    p: &ProblemInstance,
    kind: AlgorithmKind,
    s: f64,
    alpha: f64,
    z0: &DVector<f64>,
    batch_sizes: &[BatchSize],
    n_steps: usize,
    seeds: &[u64],
) -> Result<Vec<RunOutcome>> {
    if !p.is_stochastic() {
        return Err(Error::Precondition(format!("problem '{}' has no stochastic oracle", p.name())));
    }
    let z_star = DVector::zeros(p.dim());
    let cells = grid(&[alpha], seeds, batch_sizes);
    run_grid(p, kind, s, z0, &z_star, n_steps, &cells, &LimitThresholds::default())
}

fn fmt_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        let _ = write!(out, "{v:.16e}");
    }
}

/// Sweep CSV, one row per cell in the given order.
pub fn sweep_csv(rows: &[RunOutcome]) -> String {
    let mut out = String::from("alpha,seed,batch,kind,final_radius,slope,cycle_radius,spread,steps_used,noise_level,diverged\n");
    for r in rows {
        let v = &r.verdict;
        let kind = serde_json::to_value(v.kind).ok().and_then(|k| k.as_str().map(str::to_owned)).unwrap_or_default();
        let _ = write!(out, "{:.16e},{},{},{},{:.16e},{:.16e},", r.alpha, r.seed, r.batch, kind, v.final_radius, v.slope);
        fmt_opt(&mut out, v.cycle_radius);
        let _ = writeln!(
            out,
            ",{:.16e},{},{:.16e},{}",
            v.spread,
            v.steps_used,
            r.noise_level,
            r.trajectory.diverged()
        );
    }
    out
}
