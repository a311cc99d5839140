//! Discrete steppers (GDA, AGDA, EGM), gradient flow and the O(s)-resolution
//! vector fields, a fixed-step RK4 integrator and trajectory plumbing.

mod trajectory;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{GradientOracle, OracleStream, ProblemInstance};

pub use trajectory::{meta_path_for, State, Trajectory, TrajectoryMeta, DIVERGED_FLAG};

/// Norm above which a run is flagged as diverged.
pub const DIVERGENCE_RADIUS: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Gda,
    Agda,
    Egm,
    Gf,
    GdaOde,
    AgdaOde,
    EgmOde,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 7] = [
        AlgorithmKind::Gda,
        AlgorithmKind::Agda,
        AlgorithmKind::Egm,
        AlgorithmKind::Gf,
        AlgorithmKind::GdaOde,
        AlgorithmKind::AgdaOde,
        AlgorithmKind::EgmOde,
    ];

    pub fn is_discrete(self) -> bool {
        matches!(self, AlgorithmKind::Gda | AlgorithmKind::Agda | AlgorithmKind::Egm)
    }

    /// The ODE matched by a discrete method; continuous kinds map to themselves.
    pub fn ode(self) -> AlgorithmKind {
        match self {
            AlgorithmKind::Gda => AlgorithmKind::GdaOde,
            AlgorithmKind::Agda => AlgorithmKind::AgdaOde,
            AlgorithmKind::Egm => AlgorithmKind::EgmOde,
            k => k,
        }
    }

    /// The discrete method of an O(s) ODE, if any.
    pub fn discrete(self) -> Option<AlgorithmKind> {
        match self {
            AlgorithmKind::Gda | AlgorithmKind::GdaOde => Some(AlgorithmKind::Gda),
            AlgorithmKind::Agda | AlgorithmKind::AgdaOde => Some(AlgorithmKind::Agda),
            AlgorithmKind::Egm | AlgorithmKind::EgmOde => Some(AlgorithmKind::Egm),
            AlgorithmKind::Gf => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmKind::Gda => "gda",
            AlgorithmKind::Agda => "agda",
            AlgorithmKind::Egm => "egm",
            AlgorithmKind::Gf => "gf",
            AlgorithmKind::GdaOde => "gda-ode",
            AlgorithmKind::AgdaOde => "agda-ode",
            AlgorithmKind::EgmOde => "egm-ode",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown algorithm '{s}'")))
    }
}

fn check_step(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("stepsize must be positive, got {s}")))
    }
}

/// `z − sF(z)`.
pub fn step_gda(p: &ProblemInstance, z: &DVector<f64>, s: f64, oracle: &mut OracleStream) -> Result<DVector<f64>> {
    check_step(s)?;
    Ok(z - oracle.eval(p, z)? * s)
}

/// x moves first with `F_x(x, y)`, then y with `F_y(x⁺, y)`.
pub fn step_agda(p: &ProblemInstance, z: &DVector<f64>, s: f64, oracle: &mut OracleStream) -> Result<DVector<f64>> {
    check_step(s)?;
    let n = p.dim_x();
    let mut next = z.clone();
    let f = oracle.eval(p, z)?;
    for i in 0..n {
        next[i] -= s * f[i];
    }
    let g = oracle.eval(p, &next)?;
    for i in n..z.len() {
        next[i] = z[i] - s * g[i];
    }
    Ok(next)
}

/// Half step to `z − sF(z)`, then `z − sF(z_half)`.
pub fn step_egm(p: &ProblemInstance, z: &DVector<f64>, s: f64, oracle: &mut OracleStream) -> Result<DVector<f64>> {
    check_step(s)?;
    let half = z - oracle.eval(p, z)? * s;
    Ok(z - oracle.eval(p, &half)? * s)
}

pub fn step(
    p: &ProblemInstance,
    kind: AlgorithmKind,
    z: &DVector<f64>,
    s: f64,
    oracle: &mut OracleStream,
) -> Result<DVector<f64>> {
    match kind {
        AlgorithmKind::Gda => step_gda(p, z, s, oracle),
        AlgorithmKind::Agda => step_agda(p, z, s, oracle),
        AlgorithmKind::Egm => step_egm(p, z, s, oracle),
        k => Err(Error::InvalidInput(format!("'{k}' is not a discrete algorithm"))),
    }
}

/// Continuous-time dynamic `ż = G(z)` of a given kind and stepsize.
#[derive(Clone, Debug)]
pub struct VectorField {
    kind: AlgorithmKind,
    problem: ProblemInstance,
    s: f64,
}

impl VectorField {
    pub fn new(kind: AlgorithmKind, problem: ProblemInstance, s: f64) -> Result<Self> {
        if kind.is_discrete() {
            return Err(Error::InvalidInput(format!("'{kind}' is not a continuous dynamic")));
        }
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidInput(format!("stepsize must be non-negative, got {s}")));
        }
        Ok(Self { kind, problem, s })
    }

    pub fn kind(&self) -> AlgorithmKind {
        self.kind
    }

    pub fn problem(&self) -> &ProblemInstance {
        &self.problem
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `G(z)`.
    pub fn rhs(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.problem.field(z)?;
        if self.kind == AlgorithmKind::Gf || self.s == 0.0 {
            return Ok(-f);
        }
        let hb = self.problem.blocks(z)?;
        let half = 0.5 * self.s;
        Ok(match self.kind {
            AlgorithmKind::GdaOde => -&f - hb.jacobian() * &f * half,
            AlgorithmKind::EgmOde => -&f + hb.jacobian() * &f * half,
            AlgorithmKind::AgdaOde => -&f - hb.agda_matrix() * &f * half,
            _ => unreachable!("discrete kinds rejected at construction"),
        })
    }

    /// `∇G(z*)` at a stationary point, where the third-derivative term vanishes.
    pub fn jacobian_at_stationary(&self, z_star: &DVector<f64>) -> Result<DMatrix<f64>> {
        let hb = self.problem.blocks(z_star)?;
        Ok(stationary_jacobian(self.kind, &hb.jacobian(), &hb.agda_matrix(), self.s))
    }
}

/// `∇G` at a stationary point from `∇F` and the alternating matrix.
pub fn stationary_jacobian(kind: AlgorithmKind, jf: &DMatrix<f64>, agda: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    let half = 0.5 * s;
    match kind.ode() {
        AlgorithmKind::Gf => -jf,
        AlgorithmKind::GdaOde => -jf - jf * jf * half,
        AlgorithmKind::EgmOde => -jf + jf * jf * half,
        AlgorithmKind::AgdaOde => -jf - agda * jf * half,
        _ => unreachable!(),
    }
}

fn rk4_step(vf: &VectorField, z: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let k1 = vf.rhs(z)?;
    let k2 = vf.rhs(&(z + &k1 * (0.5 * h)))?;
    let k3 = vf.rhs(&(z + &k2 * (0.5 * h)))?;
    let k4 = vf.rhs(&(z + &k3 * h))?;
    Ok(z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn escaped(z: &DVector<f64>) -> bool {
    !z.iter().all(|v| v.is_finite()) || z.norm() > DIVERGENCE_RADIUS
}

/// Classical RK4 from `z0` to `t_end`, recording every state.
pub fn integrate(vf: &VectorField, z0: &DVector<f64>, dt: f64, t_end: f64) -> Result<Trajectory> {
    integrate_strided(vf, z0, dt, t_end, 1)
}

/// RK4 with a fixed step, recording every `stride`-th state and the final one.
///
/// The step is shrunk slightly when needed so that the last step lands on
/// `t_end` exactly.
pub fn integrate_strided(vf: &VectorField, z0: &DVector<f64>, dt: f64, t_end: f64, stride: usize) -> Result<Trajectory> {
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::InvalidInput("dt and t_end must be positive".into()));
    }
    if z0.len() != vf.problem.dim() {
        return Err(Error::InvalidInput("initial point has the wrong dimension".into()));
    }
    let stride = stride.max(1);
    let n = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_end / n as f64;
    let meta = TrajectoryMeta::new(vf.kind, vf.s, vf.problem.alpha(), &GradientOracle::full(), z0);
    let mut traj = Trajectory::new(meta);
    traj.push_time(0.0, z0.clone());
    let mut z = z0.clone();
    for i in 1..=n {
        let next = rk4_step(vf, &z, h)?;
        if escaped(&next) {
            if next.iter().all(|v| v.is_finite()) {
                traj.push_time(i as f64 * h, next);
            }
            traj.flag_divergence();
            return Ok(traj);
        }
        z = next;
        if i % stride == 0 || i == n {
            traj.push_time(if i == n { t_end } else { i as f64 * h }, z.clone());
        }
    }
    Ok(traj)
}

/// Iterates a discrete method `n_steps` times, recording every iterate.
pub fn run_discrete(
    p: &ProblemInstance,
    kind: AlgorithmKind,
    z0: &DVector<f64>,
    s: f64,
    n_steps: usize,
    oracle: &GradientOracle,
) -> Result<Trajectory> {
    if !kind.is_discrete() {
        return Err(Error::InvalidInput(format!("'{kind}' is not a discrete algorithm")));
    }
    check_step(s)?;
    if z0.len() != p.dim() {
        return Err(Error::InvalidInput("initial point has the wrong dimension".into()));
    }
    let mut stream = oracle.stream();
    let meta = TrajectoryMeta::new(kind, s, p.alpha(), oracle, z0);
    let mut traj = Trajectory::new(meta);
    traj.push_step(0, z0.clone());
    let mut z = z0.clone();
    for k in 1..=n_steps {
        let next = match step(p, kind, &z, s, &mut stream) {
            Ok(v) => v,
            // Overflowing iterates are divergence, not a configuration error.
            Err(Error::Domain(_)) if z.norm() > 1e6 => {
                traj.flag_divergence();
                return Ok(traj);
            }
            Err(e) => return Err(e),
        };
        if escaped(&next) {
            if next.iter().all(|v| v.is_finite()) {
                traj.push_step(k as u64, next);
            }
            traj.flag_divergence();
            return Ok(traj);
        }
        z = next;
        traj.push_step(k as u64, z.clone());
    }
    Ok(traj)
}

/// One row of a resolution table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRow {
    pub s: f64,
    pub err: f64,
}

/// `‖z(s) − z⁺‖` between the matching ODE integrated to time `s`
/// (RK4, `dt = s/1000`) and one discrete step with exact gradients.
pub fn resolution_consistency(
    p: &ProblemInstance,
    kind: AlgorithmKind,
    z: &DVector<f64>,
    s_list: &[f64],
) -> Result<Vec<ResolutionRow>> {
    let discrete = kind
        .discrete()
        .ok_or_else(|| Error::InvalidInput("gradient flow has no discrete counterpart".into()))?;
    s_list
        .iter()
        .map(|&s| {
            let vf = VectorField::new(discrete.ode(), p.clone(), s)?;
            let ode = integrate_strided(&vf, z, s / 1000.0, s, 1000)?;
            let z_ode = &ode.last().z;
            let z_disc = step(p, discrete, z, s, &mut GradientOracle::full().stream())?;
            Ok(ResolutionRow { s, err: (z_ode - z_disc).norm() })
        })
        .collect()
}

/// Successive ratios `err(s_i)/err(s_{i+1})`.
pub fn resolution_ratios(rows: &[ResolutionRow]) -> Vec<f64> {
    rows.windows(2).map(|w| w[0].err / w[1].err).collect()
}
