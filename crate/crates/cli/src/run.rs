use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use minimax_core::bifurcation::{classify_bifurcation, origin_tracker};
use minimax_core::dynamics::{integrate_strided, meta_path_for, run_discrete};
use minimax_core::lab::{classify_limit_with, grid, run_grid, sweep_csv};
use minimax_core::linalg::matrix_from_rows;
use minimax_core::nalgebra::DVector;
use minimax_core::problem::{canonical_stationary, find_stationary};
use minimax_core::stability::{certify_with_tol, NormMatrix};
use minimax_core::{BatchSize, GradientOracle, ProblemInstance, Trajectory, VectorField};
use serde::Serialize;

use crate::config::{
    BifurcateConfig, ClassifyConfig, NormChoice, RunConfig, SimulateConfig, StabilityConfig, SweepConfig,
};

/// Primary text of a command plus companion files.
pub struct Output {
    pub text: String,
    pub diverged: bool,
    pub extra: Vec<(PathBuf, String)>,
}

impl Output {
    fn plain(text: String) -> Self {
        Self { text, diverged: false, extra: Vec::new() }
    }
}

/// `run.csv` → `run.config.json`.
pub fn config_path_for(out: &Path) -> PathBuf {
    out.with_extension("config.json")
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn point(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn tracked_stationary(p: &ProblemInstance, z_star: &Option<Vec<f64>>) -> Result<DVector<f64>> {
    match z_star {
        Some(z) => {
            if z.len() != p.dim() {
                bail!("--z-star has {} coordinates, problem '{}' has {}", z.len(), p.name(), p.dim());
            }
            Ok(point(z))
        }
        None => Ok(find_stationary(p, &canonical_stationary(p), 1e-12)?),
    }
}

fn check_init(p: &ProblemInstance, init: &[f64]) -> Result<DVector<f64>> {
    if init.len() != p.dim() {
        bail!("--init has {} coordinates, problem '{}' has {}", init.len(), p.name(), p.dim());
    }
    Ok(point(init))
}

fn gnuplot_script(csv: &Path, traj: &Trajectory) -> String {
    let name = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let dim = traj.dim();
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    if dim >= 2 {
        s += "set xlabel 'z1'\nset ylabel 'z2'\n";
        s += &format!("plot '{name}' using 3:4 with lines title '{}'\n", traj.meta.algorithm);
    } else {
        let x = if traj.meta.algorithm.is_discrete() { 1 } else { 2 };
        s += &format!("plot '{name}' using {x}:3 with lines title '{}'\n", traj.meta.algorithm);
    }
    s
}

fn simulate(c: &SimulateConfig) -> Result<Output> {
    let p = ProblemInstance::from_descriptor(&c.problem)?;
    let z0 = check_init(&p, &c.init)?;
    let traj = if c.algorithm.is_discrete() {
        if c.t_end.is_some() || c.dt.is_some() {
            bail!("--t-end and --dt apply to continuous dynamics only");
        }
        let steps = c.steps.context("discrete runs need --steps")?;
        run_discrete(&p, c.algorithm, &z0, c.s, steps, &GradientOracle::new(c.batch, c.seed))?
    } else {
        if c.batch != BatchSize::Full {
            bail!("continuous dynamics use full gradients; drop --batch");
        }
        let dt = c.dt.unwrap_or(1e-3);
        let t_end = match (c.t_end, c.steps) {
            (Some(t), None) => t,
            (None, Some(n)) => n as f64 * dt,
            (Some(_), Some(_)) => bail!("give either --t-end or --steps for continuous dynamics"),
            (None, None) => bail!("continuous runs need --t-end"),
        };
        let vf = VectorField::new(c.algorithm, p, c.s)?;
        let mut t = integrate_strided(&vf, &z0, dt, t_end, c.stride)?;
        t.meta.seed = c.seed;
        t
    };
    let mut extra = Vec::new();
    if let Some(out) = &c.out {
        extra.push((meta_path_for(out), traj.meta_json()? + "\n"));
        if c.gnuplot {
            extra.push((out.with_extension("gp"), gnuplot_script(out, &traj)));
        }
    }
    Ok(Output { text: traj.to_csv(), diverged: traj.diverged(), extra })
}

fn stability(c: &StabilityConfig) -> Result<Output> {
    let p = ProblemInstance::from_descriptor(&c.problem)?;
    let z = tracked_stationary(&p, &c.z_star)?;
    let kind = c.algorithm.ode();
    let hb = p.blocks(&z)?;
    let norm = match &c.norm {
        NormChoice::Default => NormMatrix::default_for(kind, &hb, c.s)?,
        NormChoice::Identity => NormMatrix::identity(p.dim()),
        NormChoice::AgdaScaled => NormMatrix::agda_scaled(&hb, c.s)?,
        NormChoice::User(rows) => NormMatrix::user(matrix_from_rows(rows)?)?,
    };
    let vf = VectorField::new(kind, p, c.s)?;
    Ok(Output::plain(json(&certify_with_tol(&vf, &z, &norm, c.tol_boundary)?)?))
}

fn bifurcate(c: &BifurcateConfig) -> Result<Output> {
    let base = ProblemInstance::from_descriptor(&c.problem)?;
    let family = |a: f64| base.with_alpha(a);
    let report =
        classify_bifurcation(&family, c.algorithm, c.s, (c.bracket[0], c.bracket[1]), &origin_tracker, &c.options)?;
    Ok(Output::plain(json(&report)?))
}

fn classify(c: &ClassifyConfig) -> Result<Output> {
    let traj = Trajectory::read(&c.traj).with_context(|| format!("reading {}", c.traj.display()))?;
    let z = match &c.z_star {
        Some(z) if z.len() != traj.dim() => bail!("--z-star has {} coordinates, trajectory has {}", z.len(), traj.dim()),
        Some(z) => point(z),
        None => DVector::zeros(traj.dim()),
    };
    Ok(Output::plain(json(&classify_limit_with(&traj, &z, &c.thresholds)?)?))
}

fn sweep(c: &SweepConfig) -> Result<Output> {
    let p = ProblemInstance::from_descriptor(&c.problem)?;
    let z0 = check_init(&p, &c.init)?;
    if !c.algorithm.is_discrete() {
        bail!("sweep runs discrete methods (gda, agda, egm)");
    }
    let z_star = match &c.z_star {
        Some(z) => tracked_stationary(&p, &Some(z.clone()))?,
        None => canonical_stationary(&p),
    };
    let cells = grid(&c.alphas, &c.seeds, &c.batches);
    if cells.is_empty() {
        bail!("empty sweep grid");
    }
    let rows = run_grid(&p, c.algorithm, c.s, &z0, &z_star, c.steps, &cells, &c.thresholds)?;
    Ok(Output::plain(sweep_csv(&rows)))
}

pub fn execute(config: &RunConfig) -> Result<Output> {
    match config {
        RunConfig::Simulate(c) => simulate(c),
        RunConfig::Stability(c) => stability(c),
        RunConfig::Bifurcate(c) => bifurcate(c),
        RunConfig::Classify(c) => classify(c),
        RunConfig::Sweep(c) => sweep(c),
    }
}

/// Executes and writes outputs; file outputs get a config sidecar.
pub fn execute_and_write(config: &RunConfig) -> Result<bool> {
    let output = execute(config)?;
    match config.out() {
        Some(out) => {
            fs::write(out, &output.text).with_context(|| format!("writing {}", out.display()))?;
            for (path, text) in &output.extra {
                fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            let sidecar = config_path_for(out);
            fs::write(&sidecar, json(config)?).with_context(|| format!("writing {}", sidecar.display()))?;
        }
        None => print!("{}", output.text),
    }
    Ok(output.diverged)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
