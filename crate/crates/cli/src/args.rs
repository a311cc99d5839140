use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use minimax_core::bifurcation::{BifurcationOptions, DEFAULT_BISECTION_TOL, DEFAULT_FD_STEP, DEFAULT_TOL_L1};
use minimax_core::lab::LimitThresholds;
use minimax_core::linalg::{matrix_to_rows, parse_matrix};
use minimax_core::stability::DEFAULT_TOL_BOUNDARY;
use minimax_core::{AlgorithmKind, BatchSize, ProblemInstance};
use serde_json::Value;

use crate::config::{
    BifurcateConfig, ClassifyConfig, NormChoice, RunConfig, SimulateConfig, StabilityConfig, SweepConfig,
};

#[derive(Parser, Debug)]
#[command(name = "minimax", version, about = "Dynamics, certificates and Hopf analysis for smooth minimax problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a discrete method or integrate an ODE; writes a trajectory CSV.
    Simulate(SimulateArgs),
    /// Attractor certificate and closed-form conditions at a stationary point.
    Stability(StabilityArgs),
    /// Critical α, normal form and first Lyapunov coefficient.
    Bifurcate(BifurcateArgs),
    /// Limit classification of a trajectory CSV.
    Classify(ClassifyArgs),
    /// Grid of runs over α, seeds and batch sizes; writes one CSV row per cell.
    Sweep(SweepArgs),
    /// Re-execute a config sidecar.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct ProblemArgs {
    /// Registry name: bilinear, quadratic, quartic-w, quartic-m, symmetric-poly, dirac-gan, gaussian-gan.
    #[arg(long)]
    pub problem: String,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Problem parameter; matrices as `1,2;3,4`, lists as `1,2,3`.
    #[arg(long = "param", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    pub params: Vec<String>,
    /// Shorthand for `--param b=...`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    /// Fraction of the run used as the final window.
    #[arg(long, default_value_t = LimitThresholds::default().window_frac)]
    pub window: f64,
    #[arg(long, default_value_t = LimitThresholds::default().converge_rel)]
    pub converge_rel: f64,
    #[arg(long, default_value_t = LimitThresholds::default().diverge_rel)]
    pub diverge_rel: f64,
    #[arg(long, default_value_t = LimitThresholds::default().slope_tol)]
    pub slope_tol: f64,
    #[arg(long, default_value_t = LimitThresholds::default().spread_rel)]
    pub spread_rel: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub alg: AlgorithmKind,
    /// Step size (stepsize parameter of the ODE for continuous runs).
    #[arg(long)]
    pub s: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub init: String,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Integrator step for continuous runs.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Record every `stride`-th integrator step.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `full` or a sample count.
    #[arg(long, default_value = "full")]
    pub batch: BatchSize,
    /// CSV output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    pub emit_gnuplot_script: bool,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub alg: AlgorithmKind,
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub z_star: Option<String>,
    /// `default`, `identity`, `agda-scaled` or a matrix literal.
    #[arg(long, default_value = "default", allow_hyphen_values = true)]
    pub norm: String,
    #[arg(long, default_value_t = DEFAULT_TOL_BOUNDARY)]
    pub tol_boundary: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BifurcateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub alg: AlgorithmKind,
    #[arg(long, default_value_t = 0.0)]
    pub s: f64,
    /// α interval `lo:hi` with a sign change of the spectral abscissa.
    #[arg(long, allow_hyphen_values = true)]
    pub bracket: String,
    #[arg(long, default_value_t = DEFAULT_BISECTION_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_L1)]
    pub tol_l1: f64,
    #[arg(long, default_value_t = DEFAULT_FD_STEP)]
    pub fd_step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub z_star: Option<String>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub alg: AlgorithmKind,
    #[arg(long)]
    pub s: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub init: String,
    #[arg(long)]
    pub steps: usize,
    /// Comma-separated α values; defaults to `--alpha`.
    #[arg(long, allow_hyphen_values = true)]
    pub alphas: Option<String>,
    #[arg(long, default_value = "0")]
    pub seeds: String,
    /// Comma-separated batch sizes, each `full` or a count.
    #[arg(long, default_value = "full")]
    pub batches: String,
    #[arg(long, allow_hyphen_values = true)]
    pub z_star: Option<String>,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Config sidecar written by a previous run.
    #[arg(long)]
    pub config: PathBuf,
    /// Redirect the output; the sidecar's path is used when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn numbers(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number '{}'", t.trim())))
        .collect()
}

fn param_value(text: &str) -> Result<Value> {
    let text = text.trim();
    if text.contains(';') {
        return Ok(serde_json::to_value(matrix_to_rows(&parse_matrix(text)?))?);
    }
    if text.contains(',') {
        return Ok(serde_json::to_value(numbers(text)?)?);
    }
    if let Ok(i) = text.parse::<i64>() {
        return Ok(Value::from(i));
    }
    if let Ok(x) = text.parse::<f64>() {
        return Ok(Value::from(x));
    }
    Ok(serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string())))
}

impl ProblemArgs {
    pub fn instance(&self) -> Result<ProblemInstance> {
        let mut params = BTreeMap::new();
        for kv in &self.params {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--param expects KEY=VALUE, got '{kv}'"))?;
            if params.insert(k.trim().to_string(), param_value(v)?).is_some() {
                bail!("parameter '{}' given twice", k.trim());
            }
        }
        if let Some(b) = &self.b {
            if params.insert("b".to_string(), param_value(b)?).is_some() {
                bail!("parameter 'b' given twice");
            }
        }
        Ok(ProblemInstance::build(&self.problem, self.alpha.unwrap_or(0.0), &params)?)
    }
}

impl ThresholdArgs {
    fn thresholds(&self) -> LimitThresholds {
        LimitThresholds {
            window_frac: self.window,
            converge_rel: self.converge_rel,
            diverge_rel: self.diverge_rel,
            slope_tol: self.slope_tol,
            spread_rel: self.spread_rel,
        }
    }
}

fn opt_point(text: &Option<String>) -> Result<Option<Vec<f64>>> {
    text.as_deref().map(numbers).transpose()
}

fn bracket(text: &str) -> Result<[f64; 2]> {
    let (lo, hi) = text.split_once(':').ok_or_else(|| anyhow!("--bracket expects lo:hi, got '{text}'"))?;
    let lo: f64 = lo.trim().parse().with_context(|| format!("bad bracket bound '{lo}'"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("bad bracket bound '{hi}'"))?;
    Ok([lo, hi])
}

fn norm_choice(text: &str) -> Result<NormChoice> {
    Ok(match text {
        "default" => NormChoice::Default,
        "identity" => NormChoice::Identity,
        "agda-scaled" => NormChoice::AgdaScaled,
        lit => NormChoice::User(matrix_to_rows(&parse_matrix(lit)?)),
    })
}

impl Command {
    /// Resolves flags into a replayable config; `None` for `replay`.
    pub fn into_config(self) -> Result<Option<RunConfig>> {
        Ok(Some(match self {
            Command::Simulate(a) => {
                if a.emit_gnuplot_script && a.out.is_none() {
                    bail!("--emit-gnuplot-script needs --out");
                }
                RunConfig::Simulate(SimulateConfig {
                    problem: a.problem.instance()?.descriptor().clone(),
                    algorithm: a.alg,
                    s: a.s,
                    init: numbers(&a.init)?,
                    steps: a.steps,
                    t_end: a.t_end,
                    dt: a.dt,
                    stride: a.stride,
                    seed: a.seed,
                    batch: a.batch,
                    out: a.out,
                    gnuplot: a.emit_gnuplot_script,
                })
            }
            Command::Stability(a) => RunConfig::Stability(StabilityConfig {
                problem: a.problem.instance()?.descriptor().clone(),
                algorithm: a.alg,
                s: a.s,
                z_star: opt_point(&a.z_star)?,
                norm: norm_choice(&a.norm)?,
                tol_boundary: a.tol_boundary,
                out: a.out,
            }),
            Command::Bifurcate(a) => RunConfig::Bifurcate(BifurcateConfig {
                problem: a.problem.instance()?.descriptor().clone(),
                algorithm: a.alg,
                s: a.s,
                bracket: bracket(&a.bracket)?,
                options: BifurcationOptions {
                    tol: a.tol,
                    tol_l1: a.tol_l1,
                    fd_step: a.fd_step,
                    ..BifurcationOptions::default()
                },
                out: a.out,
            }),
            Command::Classify(a) => RunConfig::Classify(ClassifyConfig {
                traj: a.traj,
                z_star: opt_point(&a.z_star)?,
                thresholds: a.thresholds.thresholds(),
                out: a.out,
            }),
            Command::Sweep(a) => {
                let p = a.problem.instance()?;
                let alphas = match &a.alphas {
                    Some(t) => numbers(t)?,
                    None => vec![p.alpha()],
                };
                let seeds = a
                    .seeds
                    .split(',')
                    .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed '{}'", t.trim())))
                    .collect::<Result<Vec<_>>>()?;
                let batches = a
                    .batches
                    .split(',')
                    .map(|t| t.trim().parse::<BatchSize>().map_err(|e| anyhow!("{e}")))
                    .collect::<Result<Vec<_>>>()?;
                RunConfig::Sweep(SweepConfig {
                    problem: p.descriptor().clone(),
                    algorithm: a.alg,
                    s: a.s,
                    init: numbers(&a.init)?,
                    steps: a.steps,
                    alphas,
                    seeds,
                    batches,
                    z_star: opt_point(&a.z_star)?,
                    thresholds: a.thresholds.thresholds(),
                    out: a.out,
                })
            }
            Command::Replay(_) => return Ok(None),
        }))
    }
}
